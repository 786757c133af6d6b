import numpy as np
import pytest

import oracles
from anisoflow.operators import PhysParams, mollify
from anisoflow.spectral import Grid, ScalarField, VectorField, mean, random_trig, single_mode
from anisoflow.transport import TransportConfig, solve_transport, transport_residual

G8 = Grid(8)


def P(M=1.0):
    return PhysParams(mu=1.0, lam=1.0, theta=0.0, gamma=4.0, M=M)


def swirl(grid, amp=1.0):
    x = grid.x
    return VectorField(grid, nodal=amp * np.stack([
        np.sin(2 * np.pi * x[1]), np.cos(2 * np.pi * x[0]), np.sin(2 * np.pi * (x[0] + x[2]))]))


def test_zero_velocity_gives_constant_density():
    res = solve_transport(VectorField.zeros(G8), P(M=2.5), 0.1, 0.1)
    assert res.converged and res.iterations == 0
    assert np.abs(res.rho.nodal - 2.5).max() == 0
    assert transport_residual(res.rho, VectorField.zeros(G8), P(M=2.5), 0.1, 0.1) == 0


@pytest.mark.parametrize("eps, delta", [(1.0, 1.0), (0.1, 0.1), (0.05, 0.5)])
def test_matches_dense_solve(eps, delta):
    g = Grid(4)
    x = g.x
    z = 0 * x[0]
    v = VectorField(g, nodal=np.stack([np.sin(2 * np.pi * x[1]), z, z]))
    res = solve_transport(v, P(), eps, delta, TransportConfig(tol=1e-14))
    w = mollify(v, delta).nodal
    dense = oracles.solve_transport_dense(4, w, 1.0, eps, delta)
    assert np.abs(res.rho.nodal - dense).max() <= 1e-10 * np.abs(dense).max()


def test_matches_dense_solve_random_velocity(rng):
    g = Grid(4)
    v = VectorField(g, nodal=rng.standard_normal((3,) + g.shape))
    res = solve_transport(v, P(), 0.5, 0.5, TransportConfig(tol=1e-14))
    dense = oracles.solve_transport_dense(4, mollify(v, 0.5).nodal, 1.0, 0.5, 0.5)
    assert np.abs(res.rho.nodal - dense).max() <= 1e-10 * np.abs(dense).max()


def test_mass_and_residual(rng):
    v = random_trig(G8, rng, rank=1, mean_zero=True)
    cfg = TransportConfig(tol=1e-12)
    res = solve_transport(v, P(M=1.7), 0.1, 0.1, cfg)
    assert res.converged and res.flag == "ok"
    assert abs(mean(res.rho) - 1.7) <= 1e-12
    assert transport_residual(res.rho, v, P(M=1.7), 0.1, 0.1) <= cfg.tol
    assert res.min_rho > 0


def test_linear_in_mass():
    v = swirl(G8)
    r1 = solve_transport(v, P(M=1.0), 0.1, 0.1).rho
    r2 = solve_transport(v, P(M=2.0), 0.1, 0.1).rho
    assert np.abs(r2.nodal - 2 * r1.nodal).max() <= 1e-10


def test_uniqueness_from_different_initial_iterates(rng):
    v = swirl(G8, 0.8)
    a = solve_transport(v, P(), 0.1, 0.1).rho
    start = ScalarField(G8, nodal=1 + 0.5 * np.cos(2 * np.pi * G8.x[2]))
    b = solve_transport(v, P(), 0.1, 0.1, rho0=start).rho
    assert np.mean(np.abs(a.nodal - b.nodal)) <= 1e-8


def test_residual_linear_in_perturbation():
    v = swirl(G8)
    rho = solve_transport(v, P(), 0.1, 0.1, TransportConfig(tol=1e-14)).rho
    h = single_mode(G8, (1, 0, 0))
    vals = [transport_residual(rho + h * t, v, P(), 0.1, 0.1) for t in (1e-4, 2e-4, 4e-4)]
    assert vals[1] / vals[0] == pytest.approx(2, rel=1e-6)
    assert vals[2] / vals[0] == pytest.approx(4, rel=1e-6)


def test_nonconvergence_returns_best_iterate():
    v = swirl(G8, 3.0)
    res = solve_transport(v, P(), 0.01, 0.01, TransportConfig(tol=1e-14, max_iter=2))
    assert not res.converged and res.flag == "not-converged"
    assert res.iterations == 2
    assert abs(mean(res.rho) - 1.0) <= 1e-14


@pytest.mark.parametrize("eps, delta", [(0.0, 0.1), (0.1, 0.0), (1.5, 0.1), (0.1, 2.0)])
def test_rejects_out_of_range_parameters(eps, delta):
    with pytest.raises(ValueError):
        solve_transport(VectorField.zeros(G8), P(), eps, delta)
