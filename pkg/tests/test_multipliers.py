import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisoflow.multipliers import (
    apply_pressure_correction,
    check_hypothesis_H,
    check_smallness,
    eval_m,
    m_symbol,
    mihlin_constants,
    multiplier_report,
    norm_bound,
    smallness_value,
)
from anisoflow.operators import KernelSpec, PhysParams
from anisoflow.spectral import Grid, ScalarField, VectorField, l2_norm, random_trig, single_mode

from conftest import reference_forcing

G8 = Grid(8)


def P(mu=1.0, lam=0.0, theta=0.0, gamma=4.0, M=1.0, a=1.0):
    return PhysParams(mu=mu, lam=lam, theta=theta, gamma=gamma, M=M, a=a)


def mihlin_oracle(a1, a2, a3):
    amin = min(a1, a2, a3)
    return (1 / a3,
            max(np.sqrt(a1) / a3, np.sqrt(a2) / a3, 1 / np.sqrt(a3)) / np.sqrt(amin),
            max(a1 / a3, a2 / a3, 1.0) / amin)


# m ------------------------------------------------------------------------------------------


def test_m_vanishes_without_anisotropy():
    assert np.all(m_symbol(G8, P(theta=0.0, lam=0.7)) == 0)
    assert eval_m((1, 2, 3), P(theta=0.0)) == 0


def test_m_vanishes_on_horizontal_modes():
    assert eval_m((1, 0, 0), P(theta=0.8, lam=2.0)) == 0


def test_m_hand_value():
    assert abs(eval_m((0, 0, 1), P(mu=1.0, lam=0.0, theta=1.0)) - 1 / 3) <= 1e-15


def test_m_rejects_zero_mode():
    with pytest.raises(ValueError):
        eval_m((0, 0, 0), P(theta=0.5))


def test_m_symbol_matches_pointwise_values():
    p = P(mu=0.8, lam=0.3, theta=-0.4)
    sym = m_symbol(G8, p)
    for k in [(1, 0, 0), (0, 0, 1), (1, -2, 3), (-4, 2, -1)]:
        assert sym[k] == pytest.approx(eval_m(k, p), rel=1e-15)


def test_m_symmetries():
    p = P(mu=1.1, lam=0.2, theta=0.6)
    assert eval_m((1, 2, 3), p) == eval_m((-1, -2, -3), p)
    # rotation in (k1, k2) preserving k1^2 + k2^2
    assert eval_m((3, 4, 2), p) == pytest.approx(eval_m((5, 0, 2), p), rel=1e-15)


# Mihlin constants ------------------------------------------------------------------------------


def test_mihlin_unit_coefficients():
    assert mihlin_constants(1, 1, 1) == pytest.approx((1, 1, 1), rel=1e-15)


def test_mihlin_example():
    assert mihlin_constants(4, 1, 1) == pytest.approx((1, 2, 4), rel=1e-15)


def test_mihlin_random_triples(rng):
    for a in rng.uniform(0.01, 10, size=(20, 3)):
        got = mihlin_constants(*a)
        want = mihlin_oracle(*a)
        assert np.allclose(got, want, rtol=1e-12, atol=0)


@settings(max_examples=30, deadline=None)
@given(a=st.tuples(*[st.floats(0.01, 100)] * 3), c=st.floats(0.01, 100))
def test_mihlin_homogeneous_of_degree_minus_one(a, c):
    base = np.array(mihlin_constants(*a))
    scaled = np.array(mihlin_constants(*(c * x for x in a)))
    assert np.allclose(scaled, base / c, rtol=1e-12)


@pytest.mark.parametrize("bad", [(0, 1, 1), (1, -1, 1), (1, 1, 0)])
def test_mihlin_rejects_nonpositive(bad):
    with pytest.raises(ValueError):
        mihlin_constants(*bad)


# pressure correction ---------------------------------------------------------------------------


def test_pressure_correction_zero_without_anisotropy(rng):
    f = random_trig(G8, rng, mean_zero=True)
    assert np.abs(apply_pressure_correction(f, P(theta=0.0)).nodal).max() == 0


def test_pressure_correction_single_mode():
    f = single_mode(G8, (0, 0, 1))
    out = apply_pressure_correction(f, P(mu=1.0, lam=0.0, theta=1.0))
    assert np.abs(out.nodal - f.nodal / 3).max() < 1e-15


def test_pressure_correction_empirical_norm(rng):
    p = P(mu=1.0, lam=0.5, theta=0.7)
    sym = m_symbol(G8, p)
    k = np.unravel_index(np.argmax(np.abs(sym)), sym.shape)
    k = tuple(int(v) if v <= 4 else int(v) - 8 for v in k)
    f = single_mode(G8, k)
    ratio = l2_norm(apply_pressure_correction(f, p)) / l2_norm(f)
    assert abs(ratio - np.abs(sym).max()) <= 1e-12
    for _ in range(20):
        g = random_trig(G8, rng, mean_zero=True)
        assert l2_norm(apply_pressure_correction(g, p)) <= np.abs(sym).max() * l2_norm(g) * (1 + 1e-12)


def test_pressure_correction_keeps_mean_zero(rng):
    f = ScalarField(G8, nodal=rng.standard_normal(G8.shape) + 4)
    assert abs(apply_pressure_correction(f, P(theta=0.3)).spectral[0, 0, 0]) == 0


# smallness ---------------------------------------------------------------------------------------


def test_smallness_without_anisotropy():
    assert norm_bound(P(theta=0.0), 1.0) == 0
    assert check_smallness(P(theta=0.0), 1e-9)


def test_smallness_passing_example():
    p = P(mu=1.0, lam=10.0, theta=0.1)
    assert smallness_value(p) == pytest.approx(1.1 * 0.1 * 21 / 121, rel=1e-14)
    assert smallness_value(p) == pytest.approx(0.01909, abs=1e-5)
    assert check_smallness(p, 0.05)


def test_smallness_failing_example():
    p = P(mu=1.0, lam=0.0, theta=1.0)
    # (1+1) * 1 * 1 * |2*0 + 1| / 1^2
    assert smallness_value(p) == pytest.approx(2.0, rel=1e-15)
    assert not check_smallness(p, 0.05)


@settings(max_examples=50, deadline=None)
@given(mu=st.floats(0.1, 10), theta=st.floats(-0.9, 3), lam=st.floats(0, 50), dl=st.floats(0, 50),
       c0=st.floats(1e-3, 5))
def test_smallness_monotone_in_lambda(mu, theta, lam, dl, c0):
    if check_smallness(P(mu=mu, lam=lam, theta=theta), c0):
        assert check_smallness(P(mu=mu, lam=lam + dl, theta=theta), c0)


@settings(max_examples=50, deadline=None)
@given(mu=st.floats(0.1, 10), theta=st.floats(-0.9, 3), lam=st.floats(0, 50))
def test_sup_m_below_norm_bound(mu, theta, lam):
    p = P(mu=mu, lam=lam, theta=theta)
    assert np.abs(m_symbol(G8, p)).max() <= norm_bound(p, 1.0) * (1 + 1e-12)


def test_report_fields():
    rep = multiplier_report(G8, P(mu=1.0, lam=0.0, theta=1.0), C=2.0, c0=0.05)
    assert rep.sup_abs_m == pytest.approx(1 / 3, rel=1e-15)
    assert rep.norm_bound_value == pytest.approx(4.0)
    assert not rep.passes_smallness
    A = np.array(mihlin_oracle(2.0, 2.0, 3.0))
    assert np.allclose([rep.mihlin_A0, rep.mihlin_A1, rep.mihlin_A2], A, rtol=1e-14)
    assert all(np.isfinite(v) and v >= 0 for v in rep.as_dict().values() if not isinstance(v, bool))


# hypothesis validator ---------------------------------------------------------------------------


def test_hypothesis_passes_via_first_alternative():
    p = P(mu=1.0, lam=0.0, theta=-0.5, gamma=4.0)
    rep = check_hypothesis_H(p, KernelSpec.zero(G8), reference_forcing(G8))
    assert rep.passed and rep.alternative == "i"


def test_hypothesis_gamma_failure():
    rep = check_hypothesis_H(P(gamma=2.0), KernelSpec.zero(G8), reference_forcing(G8))
    assert not rep.passed and rep.failures == ["gamma"]


@pytest.mark.parametrize("kw, name", [({"M": 0.0}, "M"), ({"a": -1.0}, "a"), ({"mu": 0.0, "lam": 1.0}, "mu"),
                                      ({"lam": -2.0}, "mu+lambda"), ({"theta": -1.0}, "theta")])
def test_hypothesis_individual_failures(kw, name):
    assert check_hypothesis_H(P(**kw)).failures == [name]


def test_hypothesis_rejects_forcing_with_mean():
    g = reference_forcing(G8) + VectorField(G8, nodal=np.ones((3,) + G8.shape) * 0.1)
    assert check_hypothesis_H(P(), g=g).failures == ["forcing"]


def test_hypothesis_fails_both_kernel_alternatives():
    g = Grid(32)
    # narrow bumps: +0.15 at 0 and -0.225 at x1 = +-1/4, so |eta|_1 = 0.6 and
    # eta_hat = e(k) (0.15 - 0.45 cos(pi k1 / 2)) takes both signs
    bump = KernelSpec.from_config(g, ("gaussian", 0.04, 1.0)).eta_hat
    hat = bump * (0.15 - 0.45 * np.cos(np.pi * g.k[0] / 2))
    ker = KernelSpec(g, hat, np.zeros(g.shape))
    eta1, _ = ker.l1_norms()
    assert eta1 == pytest.approx(0.6, abs=0.01)
    assert ker.eta_hat.min() < 0 < ker.eta_hat.max()
    rep = check_hypothesis_H(P(mu=0.5, theta=0.0), ker)
    assert rep.failures == ["kernels"] and rep.alternative is None


def test_hypothesis_second_alternative():
    ker = KernelSpec.from_config(G8, ("gaussian", 0.05, 5.0), ("gaussian", 0.05, 5.0))
    rep = check_hypothesis_H(P(), ker)
    assert rep.passed and rep.alternative == "ii"
