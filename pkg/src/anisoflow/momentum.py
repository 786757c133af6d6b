"""Momentum right-hand side and the velocity map S.

For a density rho and velocity v, with w = omega_delta * v,

    RHS = -(delta/2)(rho v - int rho v) - div(rho w (x) v) - grad(omega_delta * a rho^gamma)
          - eps (grad v grad rho - int grad v grad rho) + omega_delta * g,

and S(v) is the mean-zero u solving -A u = RHS with rho = rho(v) from the
continuity equation.  Index conventions:

    (div(rho w (x) v))_i = sum_j d_j(rho w_j v_i),
    (grad v grad rho)_i  = sum_j d_j v^i d_j rho.

All products are evaluated on a grid refined by two and then restricted
and dealiased.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import GAUSSIAN, KernelSpec, MollifierSpec, PhysParams, apply_A, invert_A
from .spectral import (
    AXES,
    Grid,
    ScalarField,
    VectorField,
    from_padded,
    gradient_tensor,
    project_mean_zero,
    resample,
)
from .transport import TransportConfig, TransportResult, solve_transport


class NegativeDensityError(ValueError):
    """A fractional power was requested of a density with negative values."""


@dataclass(frozen=True)
class PowerConfig:
    rho_floor: float = 1e-14
    pos_tol: float = 1e-8


def _is_integer(x: float) -> bool:
    return float(x).is_integer()


def power_values(values: np.ndarray, gamma: float, cfg: PowerConfig = PowerConfig()) -> np.ndarray:
    """Nodal rho^gamma with the floor/negativity policy."""
    values = np.asarray(values, dtype=float)
    if _is_integer(gamma) and gamma >= 0:
        return values ** int(gamma)
    if values.min() < -cfg.pos_tol:
        raise NegativeDensityError(
            f"density has nodal value {values.min():.3e} below -{cfg.pos_tol:g}; "
            f"rho^{gamma} is undefined")
    return np.exp(gamma * np.log(np.maximum(values, cfg.rho_floor)))


def rho_power(rho: ScalarField, gamma: float, cfg: PowerConfig = PowerConfig()) -> ScalarField:
    """Dealiased rho^gamma, evaluated on the doubled grid."""
    fine = resample(rho, 2 * rho.grid.n).nodal
    return from_padded(power_values(fine, gamma, cfg), rho.grid)


def _fine(f, grid: Grid):
    return resample(f, 2 * grid.n)


def momentum_rhs(rho: ScalarField, v: VectorField, p: PhysParams, ker: KernelSpec, eps: float,
                 delta: float, g: VectorField, power_cfg: PowerConfig = PowerConfig(),
                 mollifier: MollifierSpec = GAUSSIAN) -> VectorField:
    grid = rho.grid
    wsym = mollifier.symbol(grid, delta)
    w = VectorField(grid, spectral=wsym * v.spectral)
    rf = _fine(rho, grid)
    R = rf.nodal
    V = _fine(v, grid).nodal
    W = _fine(w, grid).nodal
    fg = rf.grid
    kd = fg.kd

    # (delta/2)(rho v - int rho v)
    damping = project_mean_zero(from_padded(R * V, grid)) * (delta / 2)
    # div(rho w (x) v): flux[j, i] = rho w_j v_i
    flux = np.fft.fftn(R * W[:, None] * V[None, :], axes=AXES)
    conv = np.fft.ifftn(2j * np.pi * np.sum(kd[:, None] * flux, axis=0), axes=AXES).real
    convection = from_padded(conv, grid)
    # grad(omega * a rho^gamma)
    pg = rho_power(rho, p.gamma, power_cfg).spectral * p.a * wsym
    pressure = VectorField(grid, spectral=2j * np.pi * grid.kd * pg)
    # eps (grad v grad rho - mean)
    Gv = gradient_tensor(_fine(v, grid))
    grho = np.fft.ifftn(2j * np.pi * kd * rf.spectral * fg.size, axes=AXES).real
    cross = project_mean_zero(from_padded(np.einsum("ij...,j...->i...", Gv, grho), grid)) * eps
    forcing = VectorField(grid, spectral=wsym * project_mean_zero(g).spectral)

    total = forcing.spectral - damping.spectral - convection.spectral - pressure.spectral - cross.spectral
    total[:, 0, 0, 0] = 0.0
    return VectorField(grid, spectral=total)


def momentum_residual(rho: ScalarField, u: VectorField, p: PhysParams, ker: KernelSpec, eps: float,
                      delta: float, g: VectorField, homotopy: float = 1.0,
                      power_cfg: PowerConfig = PowerConfig(),
                      mollifier: MollifierSpec = GAUSSIAN) -> float:
    """Discrete L2 defect of the momentum equation, assembled term by term.

    This path does not reuse :func:`momentum_rhs`; it evaluates

        (delta/2)(rho u - int rho u) - A u / homotopy + div(rho w (x) u)
        + grad(omega * a rho^gamma) + eps (grad u grad rho - int) - omega * g.
    """
    grid = rho.grid
    n2 = 2 * grid.n
    rf, uf = resample(rho, n2), resample(u, n2)
    fg = rf.grid
    om = mollifier.symbol(fg, delta)
    R, U = rf.nodal, uf.nodal
    W = VectorField(fg, spectral=om * uf.spectral).nodal
    parts = []
    ru = R * U
    parts.append(0.5 * delta * (ru - ru.mean(axis=AXES, keepdims=True)))
    # convection, component by component
    conv = np.zeros_like(U)
    for i in range(3):
        for j in range(3):
            conv[i] += np.fft.ifftn(2j * np.pi * fg.kd[j] * np.fft.fftn(R * W[j] * U[i]),).real
    parts.append(conv)
    P = power_values(R, p.gamma, power_cfg)
    Pm = np.fft.fftn(P) * om
    parts.append(np.array([np.fft.ifftn(2j * np.pi * fg.kd[i] * Pm).real for i in range(3)]) * p.a)
    dr = [np.fft.ifftn(2j * np.pi * fg.kd[j] * np.fft.fftn(R)).real for j in range(3)]
    cr = np.zeros_like(U)
    for i in range(3):
        ui = np.fft.fftn(U[i])
        for j in range(3):
            cr[i] += np.fft.ifftn(2j * np.pi * fg.kd[j] * ui).real * dr[j]
    parts.append(eps * (cr - cr.mean(axis=AXES, keepdims=True)))
    nonlinear = from_padded(sum(parts), grid)
    g0 = project_mean_zero(g)
    total = (nonlinear.spectral - apply_A(u, p, ker).spectral / homotopy
             - mollifier.symbol(grid, delta) * g0.spectral)
    return float(np.sqrt(np.sum(np.abs(total) ** 2)))


@dataclass
class SResult:
    u: VectorField
    rho: ScalarField
    transport: TransportResult


def apply_S(v: VectorField, p: PhysParams, ker: KernelSpec, eps: float, delta: float,
            g: VectorField, transport_cfg: TransportConfig | None = None,
            power_cfg: PowerConfig = PowerConfig(), rho0: ScalarField | None = None,
            mollifier: MollifierSpec = GAUSSIAN) -> SResult:
    """One application of the velocity map: density from v, then -A u = RHS."""
    tr = solve_transport(v, p, eps, delta, transport_cfg, rho0=rho0, mollifier=mollifier)
    rhs = momentum_rhs(tr.rho, v, p, ker, eps, delta, g, power_cfg, mollifier)
    u = invert_A(rhs, p, ker)
    return SResult(u, tr.rho, tr)
