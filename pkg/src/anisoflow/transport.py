"""Regularised stationary continuity equation.

Given a velocity v, find rho with

    -eps Delta rho + delta (rho - M) + div(rho w) = 0,   w = omega_delta * v.

The equation is linear in rho.  It is solved by damped Richardson iteration
on the map

    T(rho) = (-eps Delta + delta)^{-1} [delta M - div P(rho w)],

where P is the 2/3 dealiasing projection.  The k=0 row of the equation
forces the mean of every iterate to equal M.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .operators import GAUSSIAN, MollifierSpec, PhysParams, mollify
from .spectral import ScalarField, VectorField, dealias, div

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransportConfig:
    tol: float = 1e-12
    max_iter: int = 2000
    relax: float = 1.0
    pos_tol: float = 1e-8


@dataclass
class TransportResult:
    rho: ScalarField
    residual: float
    iterations: int
    converged: bool
    min_rho: float
    negative: bool = False

    @property
    def flag(self) -> str:
        if not self.converged:
            return "not-converged"
        return "undershoot" if self.negative else "ok"


def _flux(rho: ScalarField, w: VectorField) -> VectorField:
    """Dealiased rho w, product taken on the grid."""
    return dealias(VectorField(rho.grid, nodal=rho.nodal[None] * w.nodal))


def _transport_defect(rho: ScalarField, w: VectorField, M: float, eps: float, delta: float) -> np.ndarray:
    grid = rho.grid
    s = (4 * np.pi**2 * eps * grid.k2 + delta) * rho.spectral + div(_flux(rho, w)).spectral
    s = s.copy()
    s[0, 0, 0] -= delta * M
    return s


def transport_residual(rho: ScalarField, v: VectorField, p: PhysParams, eps: float, delta: float,
                       mollifier: MollifierSpec = GAUSSIAN) -> float:
    """Discrete L2 norm of -eps Delta rho + delta (rho - M) + div(rho omega_delta * v)."""
    w = mollify(v, delta, mollifier)
    return float(np.sqrt(np.sum(np.abs(_transport_defect(rho, w, p.M, eps, delta)) ** 2)))


def solve_transport(v: VectorField, p: PhysParams, eps: float, delta: float,
                    cfg: TransportConfig | None = None, rho0: ScalarField | None = None,
                    mollifier: MollifierSpec = GAUSSIAN) -> TransportResult:
    """Damped Richardson iteration for the density.

    The damping factor starts at ``cfg.relax`` and is halved whenever the
    residual grows.  The best iterate is returned if ``cfg.max_iter`` is
    exhausted.
    """
    cfg = cfg or TransportConfig()
    if not (0 < eps <= 1 and 0 < delta <= 1):
        raise ValueError(f"eps and delta must lie in (0, 1], got eps={eps}, delta={delta}")
    grid = v.grid
    w = mollify(v, delta, mollifier)
    symbol = 4 * np.pi**2 * eps * grid.k2 + delta

    def T(r: ScalarField) -> np.ndarray:
        s = -div(_flux(r, w)).spectral / symbol
        s[0, 0, 0] = p.M
        return s

    def res(r):
        return float(np.sqrt(np.sum(np.abs(_transport_defect(r, w, p.M, eps, delta)) ** 2)))

    if rho0 is None:
        rho = ScalarField(grid, spectral=np.zeros(grid.shape, complex)) + p.M
    else:
        s = rho0.spectral.copy()
        s[0, 0, 0] = p.M
        rho = ScalarField(grid, spectral=s)
    r = res(rho)
    best, best_r = rho, r
    tau = cfg.relax
    it = 0
    while r > cfg.tol and it < cfg.max_iter:
        it += 1
        new = rho.spectral + tau * (T(rho) - rho.spectral)
        new[0, 0, 0] = p.M
        cand = ScalarField(grid, spectral=new)
        rc = res(cand)
        if not np.isfinite(rc):
            tau *= 0.5
            continue
        if rc > r:
            tau *= 0.5
        rho, r = cand, rc
        if r < best_r:
            best, best_r = rho, r
        if tau < 1e-8:
            break
    converged = best_r <= cfg.tol
    if not converged:
        log.warning("transport did not converge: residual %.3e after %d iterations", best_r, it)
    mn = float(best.nodal.min())
    return TransportResult(best, best_r, it, converged, mn, mn < -cfg.pos_tol)
