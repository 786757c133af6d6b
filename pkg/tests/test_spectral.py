import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisoflow.spectral import (
    Grid,
    ScalarField,
    VectorField,
    dealias,
    grad,
    is_band_limited,
    laplacian,
    mean,
    partial,
    product,
    project_mean_zero,
    random_trig,
    read_field,
    resample,
    single_mode,
    write_field,
)


@pytest.mark.parametrize("n", [0, 3, 6, 12, -4])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        Grid(n)


def test_wavenumber_layout():
    g = Grid(8)
    assert g.k[0, :, 0, 0].tolist() == [0, 1, 2, 3, -4, -3, -2, -1]
    assert g.kd[0, 4, 0, 0] == 0
    assert g.k2[4, 0, 0] == 16


def test_constant_field_has_only_mean_mode():
    g = Grid(8)
    f = ScalarField(g, nodal=np.full(g.shape, 2.5))
    s = f.spectral
    assert s[0, 0, 0] == pytest.approx(2.5)
    s2 = s.copy()
    s2[0, 0, 0] = 0
    assert np.abs(s2).max() < 1e-15


def test_single_cosine_coefficients():
    g = Grid(8)
    f = single_mode(g, (1, 0, 0))
    s = f.spectral
    assert s[1, 0, 0] == pytest.approx(0.5)
    assert s[-1, 0, 0] == pytest.approx(0.5)
    s = s.copy()
    s[1, 0, 0] = s[-1, 0, 0] = 0
    assert np.abs(s).max() < 1e-15


def test_round_trip(rng):
    g = Grid(16)
    a = rng.standard_normal(g.shape)
    f = ScalarField(g, nodal=a)
    back = ScalarField(g, spectral=f.spectral).nodal
    assert np.abs(back - a).max() <= 1e-12 * np.abs(a).max()


def test_fields_are_immutable(rng):
    f = ScalarField(Grid(4), nodal=rng.standard_normal((4, 4, 4)))
    with pytest.raises(ValueError):
        f.nodal[0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        f.spectral[0, 0, 0] = 1.0


def test_conjugate_symmetry(rng):
    g = Grid(8)
    s = ScalarField(g, nodal=rng.standard_normal(g.shape)).spectral
    mirrored = np.roll(np.flip(s), 1, axis=(0, 1, 2))
    assert np.abs(s - np.conj(mirrored)).max() < 1e-14


@pytest.mark.parametrize(
    "build, m, projected",
    [
        (lambda x: 5 + 0 * x[0], 5.0, lambda x: 0 * x[0]),
        (lambda x: np.sin(2 * np.pi * x[1]), 0.0, lambda x: np.sin(2 * np.pi * x[1])),
        (lambda x: 3 + np.cos(2 * np.pi * x[2]), 3.0, lambda x: np.cos(2 * np.pi * x[2])),
    ],
)
def test_mean_and_projection(build, m, projected):
    g = Grid(8)
    f = ScalarField(g, nodal=build(g.x))
    assert mean(f) == pytest.approx(m, abs=1e-15)
    assert np.abs(project_mean_zero(f).nodal - projected(g.x)).max() < 1e-14


def test_projection_idempotent_and_commutes_with_derivatives(rng):
    g = Grid(8)
    f = random_trig(g, rng) + 3.0
    p1 = project_mean_zero(f)
    assert np.allclose(project_mean_zero(p1).spectral, p1.spectral, atol=1e-15)
    for ax in range(3):
        a = project_mean_zero(partial(f, ax)).spectral
        b = partial(project_mean_zero(f), ax).spectral
        assert np.abs(a - b).max() < 1e-14


def test_dealias_keeps_band_limited_fields(rng):
    g = Grid(16)
    f = random_trig(g, rng)
    assert is_band_limited(f, tol=1e-15)
    assert np.abs(dealias(f).spectral - f.spectral).max() < 1e-15


def test_dealias_removes_high_mode():
    g = Grid(16)
    f = single_mode(g, (7, 0, 0))
    assert np.abs(dealias(f).nodal).max() < 1e-13


def test_dealiased_product_matches_refined_product(rng):
    # oracle: multiply on a grid twice as fine, restrict, then apply the 2/3 rule
    g = Grid(16)
    a, b = random_trig(g, rng), random_trig(g, rng)
    on_grid = dealias(ScalarField(g, nodal=a.nodal * b.nodal))
    fine = Grid(32)
    exact = ScalarField(fine, nodal=resample(a, 32).nodal * resample(b, 32).nodal)
    restricted = dealias(resample(exact, 16))
    assert np.abs(on_grid.spectral - restricted.spectral).max() < 1e-14
    assert np.abs(product(a, b).spectral - restricted.spectral).max() < 1e-14


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_parseval(seed):
    rng = np.random.default_rng(seed)
    g = Grid(8)
    f = ScalarField(g, nodal=rng.standard_normal(g.shape))
    h = ScalarField(g, nodal=rng.standard_normal(g.shape))
    lhs = np.mean(f.nodal * h.nodal)
    rhs = np.real(np.sum(f.spectral * np.conj(h.spectral)))
    assert abs(lhs - rhs) <= 1e-12 * np.sqrt(np.mean(f.nodal**2) * np.mean(h.nodal**2))


def test_derivative_of_single_mode():
    g = Grid(8)
    f = single_mode(g, (0, 2, 0), kind="sin")
    expected = 4 * np.pi * np.cos(4 * np.pi * g.x[1])
    assert np.abs(grad(f).nodal[1] - expected).max() < 1e-12
    assert np.abs(laplacian(f).nodal + 16 * np.pi**2 * f.nodal).max() < 1e-10


def test_resample_is_exact_for_trig_polynomials(rng):
    g = Grid(8)
    f = random_trig(g, rng)
    up = resample(f, 32)
    assert np.abs(resample(up, 8).spectral - f.spectral).max() < 1e-15
    x = up.grid.x
    k = (1, -2, 1)
    h = single_mode(g, k)
    assert np.abs(resample(h, 32).nodal - np.cos(2 * np.pi * (x[0] - 2 * x[1] + x[2]))).max() < 1e-13


def test_field_dump_round_trip(tmp_path, rng):
    g = Grid(4)
    u = VectorField(g, nodal=rng.standard_normal((3,) + g.shape))
    rho = ScalarField(g, nodal=rng.standard_normal(g.shape))
    write_field(tmp_path / "u.bin", u)
    write_field(tmp_path / "rho.bin", rho)
    assert np.array_equal(read_field(tmp_path / "u.bin").nodal, u.nodal)
    assert np.array_equal(read_field(tmp_path / "rho.bin").nodal, rho.nodal)


def test_field_dump_layout(tmp_path):
    g = Grid(4)
    vals = np.arange(64, dtype=float).reshape(g.shape)
    write_field(tmp_path / "f.bin", ScalarField(g, nodal=vals))
    data = (tmp_path / "f.bin").read_bytes()
    head, body = data.split(b"\n", 1)
    assert head == b"anisoflow-field v1 scalar n=4"
    flat = np.frombuffer(body, dtype="<f8")
    # x index fastest
    assert flat[1] == vals[1, 0, 0]
    assert flat[4] == vals[0, 1, 0]
    assert flat[16] == vals[0, 0, 1]


def test_read_field_rejects_garbage(tmp_path):
    (tmp_path / "bad").write_bytes(b"hello\n1234")
    with pytest.raises(ValueError):
        read_field(tmp_path / "bad")


def test_vector_component_access(rng):
    g = Grid(4)
    u = random_trig(g, rng, rank=1)
    parts = u.components
    back = VectorField.from_components(*parts)
    assert np.abs(back.nodal - u.nodal).max() < 1e-14


def test_scalar_arithmetic():
    g = Grid(4)
    f = ScalarField(g, spectral=np.zeros(g.shape, complex)) + 2.0
    assert np.allclose(f.nodal, 2.0)
    assert np.allclose((3.0 - f).nodal, 1.0)
    assert np.allclose((f * 2).nodal, 4.0)
