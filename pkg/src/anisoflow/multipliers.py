"""Fourier-multiplier toolkit and the hypothesis validator.

The pressure-correction operator ``Id - (2mu+lam) (mu Delta_theta + (mu+lam) Delta)^{-1} Delta``
acts on mean-zero fields through the multiplier

    m(k) = theta mu k_3^2 / ((2mu+lam)(k_1^2 + k_2^2) + ((2+theta)mu + lam) k_3^2).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .operators import KernelSpec, PhysParams
from .spectral import Grid, ScalarField, VectorField, lp_norm, mean

DEFAULT_C = 1.0
DEFAULT_C0 = 0.05


def _denominator_coeffs(p: PhysParams) -> tuple[float, float, float]:
    nu = 2 * p.mu + p.lam
    return nu, nu, (2 + p.theta) * p.mu + p.lam


def eval_m(k, p: PhysParams) -> float:
    k1, k2, k3 = (float(x) for x in k)
    if k1 == k2 == k3 == 0:
        raise ValueError("the multiplier is undefined at k = 0")
    a1, a2, a3 = _denominator_coeffs(p)
    den = a1 * k1**2 + a2 * k2**2 + a3 * k3**2
    if den <= 0:
        raise ValueError(f"multiplier denominator is not positive at k={tuple(k)}")
    return p.theta * p.mu * k3**2 / den


def m_symbol(grid: Grid, p: PhysParams) -> np.ndarray:
    """m on the grid lattice, with m(0) set to 0."""
    k = grid.k
    a1, a2, a3 = _denominator_coeffs(p)
    den = a1 * k[0] ** 2 + a2 * k[1] ** 2 + a3 * k[2] ** 2
    den[0, 0, 0] = 1.0
    out = p.theta * p.mu * k[2] ** 2 / den
    out[0, 0, 0] = 0.0
    return out


def mihlin_constants(a1: float, a2: float, a3: float) -> tuple[float, float, float]:
    """Mihlin constants of k_3^2 / (a1 k_1^2 + a2 k_2^2 + a3 k_3^2)."""
    if min(a1, a2, a3) <= 0:
        raise ValueError("Mihlin constants need positive coefficients")
    amin = min(a1, a2, a3)
    A0 = 1.0 / a3
    A1 = max(np.sqrt(a1) / a3, np.sqrt(a2) / a3, 1.0 / np.sqrt(a3)) / np.sqrt(amin)
    A2 = max(a1 / a3, a2 / a3, 1.0) / amin
    return float(A0), float(A1), float(A2)


def apply_pressure_correction(f: ScalarField, p: PhysParams) -> ScalarField:
    """Multiply each mode by m(k); the mean is dropped."""
    return f.with_spectral(m_symbol(f.grid, p) * f.spectral)


def smallness_value(p: PhysParams) -> float:
    """(1+|theta|) |theta| mu |2 lam + mu| / (lam + mu)^2."""
    th = abs(p.theta)
    return (1 + th) * th * p.mu * abs(2 * p.lam + p.mu) / (p.lam + p.mu) ** 2


def norm_bound(p: PhysParams, C: float = DEFAULT_C) -> float:
    return C * smallness_value(p)


def check_smallness(p: PhysParams, c0: float = DEFAULT_C0) -> bool:
    return smallness_value(p) <= c0


@dataclass
class MultiplierReport:
    sup_abs_m: float
    mihlin_A0: float
    mihlin_A1: float
    mihlin_A2: float
    norm_bound_value: float
    smallness_value: float
    c0: float
    passes_smallness: bool

    def as_dict(self) -> dict:
        return asdict(self)


def multiplier_report(grid: Grid, p: PhysParams, C: float = DEFAULT_C,
                      c0: float = DEFAULT_C0) -> MultiplierReport:
    """Collect the multiplier quantities for one parameter set.

    The Mihlin constants are those of m itself, i.e. the constants of the
    normalised quotient scaled by |theta| mu.
    """
    coeffs = _denominator_coeffs(p)
    if min(coeffs) > 0:
        A = [abs(p.theta) * p.mu * x for x in mihlin_constants(*coeffs)]
    else:
        A = [float("inf")] * 3
    s = smallness_value(p)
    return MultiplierReport(
        sup_abs_m=float(np.max(np.abs(m_symbol(grid, p)))),
        mihlin_A0=A[0], mihlin_A1=A[1], mihlin_A2=A[2],
        norm_bound_value=C * s,
        smallness_value=s,
        c0=c0,
        passes_smallness=bool(s <= c0),
    )


# hypothesis validator -------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class HypothesisReport:
    checks: list[Check] = field(default_factory=list)
    alternative: str | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "alternative": self.alternative,
            "checks": [asdict(c) for c in self.checks],
        }


def check_hypothesis_H(p: PhysParams, ker: KernelSpec | None = None, g: VectorField | None = None,
                       refine: int = 4, mean_tol: float = 1e-12) -> HypothesisReport:
    """Evaluate every bullet of the standing hypothesis.

    Each bullet becomes a named :class:`Check`.  The kernel bullet passes
    through alternative "i" (L1 smallness) or "ii" (nonnegative
    coefficients); the report records which one was used.
    """
    rep = HypothesisReport()
    add = rep.checks.append
    add(Check("M", p.M > 0, f"M={p.M!r}"))
    add(Check("gamma", p.gamma > 3, f"adiabatic constant gamma={p.gamma!r} must exceed 3"))
    add(Check("a", p.a > 0, f"a={p.a!r}"))
    add(Check("mu", p.mu > 0, f"mu={p.mu!r}"))
    add(Check("mu+lambda", p.mu + p.lam > 0, f"mu+lambda={p.mu + p.lam!r}"))
    add(Check("theta", p.theta > -1, f"theta={p.theta!r}"))

    if g is not None:
        gm = mean(g)
        q = 3 * (p.gamma - 1) / (2 * p.gamma - 1) if p.gamma > 0.5 else 1.0
        gn = lp_norm(g.nodal, q)
        ok = bool(np.all(np.abs(gm) <= mean_tol) and np.isfinite(gn))
        add(Check("forcing", ok, f"mean={list(map(float, gm))}, L^{q:.6g} norm={gn:.6g}"))

    if ker is not None:
        eta1, xi1 = ker.l1_norms(refine)
        margin = min(1.0, 1.0 + p.theta) * p.mu - eta1 - xi1 / 3.0
        alt_i = margin > 0
        alt_ii = bool(np.all(ker.eta_hat >= 0) and np.all(ker.xi_hat >= 0))
        rep.alternative = "i" if alt_i else ("ii" if alt_ii else None)
        add(Check("kernels", alt_i or alt_ii,
                  f"alternative i margin={margin:.6g}; alternative ii (nonnegative coefficients)={alt_ii}"))
    return rep
