"""Anisotropic, nonlocal viscous operator and its building blocks.

The operator is

    A u = mu Delta_theta u + (mu + lam) grad div u + eta * Delta u + xi * grad div u,

with ``Delta_theta = Delta + theta d_33``.  Every piece is diagonal in
Fourier space, so A acts mode by mode through the 3x3 symbol

    -4 pi^2 [ a(k) I + b(k) k (x) k ],
    a(k) = mu (|k|^2 + theta k_3^2) + eta_hat(k) |k|^2,
    b(k) = mu + lam + xi_hat(k).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    AXES,
    Grid,
    ScalarField,
    VectorField,
    div,
    from_padded,
    grad,
    gradient_tensor,
    resample,
)

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class PhysParams:
    """Physical constants.  Hypothesis checks live in :mod:`multipliers`."""

    mu: float
    lam: float
    theta: float
    gamma: float
    M: float
    a: float = 1.0

    def __post_init__(self):
        for name in ("mu", "lam", "theta", "gamma", "M", "a"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"parameter {name} must be finite, got {v!r}")

    @property
    def nu(self) -> float:
        """Longitudinal viscosity 2 mu + lambda."""
        return 2 * self.mu + self.lam


class SingularSymbolError(ArithmeticError):
    """Raised when the symbol of A cannot be inverted at some wavenumber."""

    def __init__(self, k):
        self.k = tuple(int(x) for x in k)
        super().__init__(f"operator symbol is singular at k={self.k}")


# kernels ----------------------------------------------------------------------


def _even_part_error(grid: Grid, hat: np.ndarray) -> float:
    flipped = np.roll(np.flip(hat, axis=AXES), 1, axis=AXES)
    return float(np.max(np.abs(hat - flipped)))


def _gaussian_hat(grid: Grid, sigma: float, amplitude: float) -> np.ndarray:
    return amplitude * np.exp(-2 * np.pi**2 * sigma**2 * grid.k2)


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Fourier coefficients of the kernels eta and xi on a grid's lattice."""

    grid: Grid
    eta_hat: np.ndarray
    xi_hat: np.ndarray

    def __post_init__(self):
        for name in ("eta_hat", "xi_hat"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != self.grid.shape:
                raise ValueError(f"{name} must have shape {self.grid.shape}")
            if _even_part_error(self.grid, arr) > 1e-12 * (1 + np.abs(arr).max()):
                raise ValueError(f"{name} must be even in k")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def zero(cls, grid: Grid) -> "KernelSpec":
        z = np.zeros(grid.shape)
        return cls(grid, z, z)

    @classmethod
    def from_config(cls, grid: Grid, eta=None, xi=None) -> "KernelSpec":
        """Build from the config descriptors (see :func:`kernel_hat`)."""
        return cls(grid, kernel_hat(grid, eta), kernel_hat(grid, xi))

    def l1_norms(self, refine: int = 4) -> tuple[float, float]:
        return kernel_l1_norm(self.grid, self.eta_hat, refine), kernel_l1_norm(self.grid, self.xi_hat, refine)

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.eta_hat) or np.any(self.xi_hat))


def kernel_hat(grid: Grid, desc) -> np.ndarray:
    """Kernel coefficients from a descriptor.

    ``None`` or ``"zero"`` gives the zero kernel; ``("gaussian", sigma, amp)``
    gives ``amp * exp(-2 pi^2 sigma^2 |k|^2)`` (a periodised Gaussian of
    integral ``amp``); a list of ``(k, value)`` pairs sets individual
    coefficients, with the value mirrored to ``-k``.
    """
    if desc is None or desc == "zero":
        return np.zeros(grid.shape)
    if isinstance(desc, tuple) and desc and desc[0] == "gaussian":
        _, sigma, amp = desc
        if sigma < 0:
            raise ValueError("gaussian kernel needs sigma >= 0")
        return _gaussian_hat(grid, float(sigma), float(amp))
    hat = np.zeros(grid.shape)
    for k, value in desc:
        k = tuple(int(x) for x in k)
        hat[grid.mode_index(k)] = float(value)
        neg = tuple(-x for x in k)
        if all(-grid.n // 2 <= x < grid.n // 2 for x in neg):
            hat[grid.mode_index(neg)] = float(value)
    return hat


def kernel_l1_norm(grid: Grid, hat: np.ndarray, refine: int = 4) -> float:
    """L1 norm of the kernel, by quadrature of its inverse transform on a refined grid."""
    f = ScalarField(grid, spectral=np.asarray(hat, dtype=complex))
    return float(np.mean(np.abs(resample(f, grid.n * refine).nodal)))


# mollifier ------------------------------------------------------------------------


@dataclass(frozen=True)
class MollifierSpec:
    """Gaussian mollifier family, omega_hat_delta(k) = exp(-delta^2 |2 pi k|^2)."""

    family: str = "gaussian"

    def __post_init__(self):
        if self.family != "gaussian":
            raise ValueError(f"unknown mollifier family {self.family!r}")

    def symbol(self, grid: Grid, delta: float) -> np.ndarray:
        return np.exp(-(delta**2) * (TWO_PI**2) * grid.k2)


GAUSSIAN = MollifierSpec()


# elementary operators --------------------------------------------------------------


def theta_k2(grid: Grid, theta: float) -> np.ndarray:
    """|k|^2 + theta k_3^2."""
    return grid.k2 + theta * grid.k[2] ** 2


def apply_delta_theta(f, p: PhysParams):
    """Delta_theta = Delta + theta d_33, componentwise on vector fields."""
    return f.with_spectral(-4 * np.pi**2 * theta_k2(f.grid, p.theta) * f.spectral)


def _theta_weights(p: PhysParams) -> np.ndarray:
    if p.theta <= -1:
        raise ValueError("theta must exceed -1")
    return np.array([1.0, 1.0, np.sqrt(1 + p.theta)])


def grad_theta(f: ScalarField, p: PhysParams) -> VectorField:
    w = _theta_weights(p)[:, None, None, None]
    return VectorField(f.grid, spectral=w * grad(f).spectral)


def div_theta(u: VectorField, p: PhysParams) -> ScalarField:
    w = np.array([1.0, 1.0, 1 + p.theta])[:, None, None, None]
    return div(VectorField(u.grid, spectral=w * u.spectral))


def convolve(hat: np.ndarray, f):
    """Periodic convolution with the kernel whose coefficients are ``hat``."""
    return f.with_spectral(hat * f.spectral)


def mollify(f, delta: float, mollifier: MollifierSpec = GAUSSIAN):
    return convolve(mollifier.symbol(f.grid, delta), f)


# the operator A -----------------------------------------------------------------------


def symbol_coefficients(grid: Grid, p: PhysParams, ker: KernelSpec):
    """Scalar coefficients (a(k), b(k)) of the symbol, without the -4 pi^2 factor."""
    a = p.mu * theta_k2(grid, p.theta) + ker.eta_hat * grid.k2
    b = p.mu + p.lam + ker.xi_hat
    return a, b


def apply_A(u: VectorField, p: PhysParams, ker: KernelSpec) -> VectorField:
    a, b = symbol_coefficients(u.grid, p, ker)
    kd = u.grid.kd
    kdotu = np.sum(kd * u.spectral, axis=0)
    s = -4 * np.pi**2 * (a * u.spectral + b * kd * kdotu)
    return VectorField(u.grid, spectral=s)


def invert_A(f: VectorField, p: PhysParams, ker: KernelSpec, rtol: float = 1e-12) -> VectorField:
    """Mean-zero solution w of -A w = f.

    Each mode is solved with the Sherman-Morrison formula
    (aI + b kk^T)^{-1} = (I - b kk^T / (a + b|k|^2)) / a.
    The mean of ``f`` is ignored (the k=0 equation is the mean-zero constraint).
    """
    grid = f.grid
    a, b = symbol_coefficients(grid, p, ker)
    kd = grid.kd
    kd2 = np.sum(kd**2, axis=0)
    denom = a + b * kd2
    nonzero = grid.k2 > 0
    scale = np.max(np.abs(a[nonzero])) if np.any(nonzero) else 1.0
    bad = nonzero & ((np.abs(a) <= rtol * scale) | (np.abs(denom) <= rtol * scale))
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise SingularSymbolError(grid.k[(slice(None),) + tuple(idx)])
    a_safe = np.where(nonzero, a, 1.0)
    d_safe = np.where(nonzero, denom, 1.0)
    g = f.spectral / (4 * np.pi**2)
    kdotg = np.sum(kd * g, axis=0)
    w = (g - b * kd * kdotg / d_safe) / a_safe
    w[:, 0, 0, 0] = 0.0
    return VectorField(grid, spectral=w)


# quadratic forms --------------------------------------------------------------------


def quadratic_form_C(u: VectorField, p: PhysParams) -> ScalarField:
    """C(u,u) = mu grad_theta u : grad_theta u + (mu + lam)(div u)^2, dealiased."""
    G = _padded_gradient(u)
    w = np.array([1.0, 1.0, 1 + p.theta])[None, :, None, None, None]
    divu = np.einsum("ii...->...", G)
    values = p.mu * np.sum(w * G**2, axis=(0, 1)) + (p.mu + p.lam) * divu**2
    return from_padded(values, u.grid)


def _padded_gradient(u: VectorField) -> np.ndarray:
    fine = resample(u, 2 * u.grid.n)
    return gradient_tensor(fine)


def quadratic_form_B(u: VectorField, p: PhysParams, ker: KernelSpec) -> ScalarField:
    """The divergence-plus-kernel part B(u,u) with <Au,u> = B - C, dealiased."""
    grid = u.grid
    fine = resample(u, 2 * grid.n)
    fg = fine.grid
    U = fine.nodal
    G = gradient_tensor(fine)                       # G[i, j] = d_j u^i
    divu = np.einsum("ii...->...", G)
    eta = resample(ScalarField(grid, spectral=ker.eta_hat.astype(complex)), fg.n).spectral
    xi = resample(ScalarField(grid, spectral=ker.xi_hat.astype(complex)), fg.n).spectral
    # the resampled kernels lose their Nyquist planes; the retained values are
    # the only ones that can meet band-limited u
    etaG = np.fft.ifftn(eta * np.fft.fftn(G, axes=AXES), axes=AXES).real
    xidiv = np.fft.ifftn(xi * np.fft.fftn(divu, axes=AXES), axes=AXES).real

    def fdiv(vec):
        return div(VectorField(fg, nodal=vec)).nodal

    half_lap = 0.5 * p.mu * np.fft.ifftn(
        -4 * np.pi**2 * theta_k2(fg, p.theta) * np.fft.fftn(np.sum(U**2, axis=0), axes=AXES),
        axes=AXES).real
    values = (
        half_lap
        + (p.mu + p.lam) * fdiv(U * divu)
        + fdiv(np.einsum("ij...,i...->j...", etaG, U))
        - np.sum(etaG * G, axis=(0, 1))
        + fdiv(xidiv * U)
        - xidiv * divu
    )
    return from_padded(values, grid)


def grad_energy(u: VectorField) -> float:
    """Integral of grad u : grad u."""
    G = 2j * np.pi * u.grid.kd[None, :] * u.spectral[:, None]
    return float(np.sum(np.abs(G) ** 2))


def div_energy(u: VectorField) -> float:
    return float(np.sum(np.abs(div(u).spectral) ** 2))


def dissipation(u: VectorField, p: PhysParams, ker: KernelSpec) -> float:
    """-integral <Au, u>, evaluated through Parseval."""
    return -float(np.sum(np.real(np.conj(u.spectral) * apply_A(u, p, ker).spectral)))


def coercivity_bounds(u: VectorField, p: PhysParams, ker: KernelSpec, refine: int = 4):
    """(-int <Au,u>, rhs1, rhs2) for the two kernel alternatives.

    rhs1 = (min(1, 1+theta) mu - |eta|_1 - |xi|_1 / 3) int grad u:grad u + (mu+lam) int (div u)^2
    rhs2 = min(1, 1+theta) mu int grad u:grad u
           + sum_k eta_hat |d_j u^i hat|^2 + sum_k xi_hat |div u hat|^2
    """
    lhs = dissipation(u, p, ker)
    gu = grad_energy(u)
    du = div_energy(u)
    eta1, xi1 = ker.l1_norms(refine)
    c = min(1.0, 1.0 + p.theta) * p.mu
    rhs1 = (c - eta1 - xi1 / 3.0) * gu + (p.mu + p.lam) * du
    G = 2j * np.pi * u.grid.kd[None, :] * u.spectral[:, None]
    rhs2 = (c * gu
            + float(np.sum(ker.eta_hat * np.sum(np.abs(G) ** 2, axis=(0, 1))))
            + float(np.sum(ker.xi_hat * np.abs(div(u).spectral) ** 2)))
    return lhs, rhs1, rhs2


def longitudinal_operator(grid: Grid, p: PhysParams) -> np.ndarray:
    """Symbol of L = mu Delta_theta + (mu + lam) Delta."""
    return -4 * np.pi**2 * (p.mu * theta_k2(grid, p.theta) + (p.mu + p.lam) * grid.k2)


def flux_operator_identities(u: VectorField, p: PhysParams, ker: KernelSpec):
    """L2 residuals of the two divergence identities for A.

    div A u   = (mu Delta_theta + (mu+lam) Delta) div u + Delta((eta + xi) * div u)
    div_th A u = Delta_theta(mu div_th u + (mu+lam) div u + xi * div u) + Delta eta * div_th u
    """
    grid = u.grid
    Au = apply_A(u, p, ker)
    lap = -4 * np.pi**2 * grid.k2
    lap_t = -4 * np.pi**2 * theta_k2(grid, p.theta)
    du = div(u).spectral
    dtu = div_theta(u, p).spectral
    r1 = div(Au).spectral - (longitudinal_operator(grid, p) * du
                             + lap * (ker.eta_hat + ker.xi_hat) * du)
    r2 = div_theta(Au, p).spectral - (lap_t * (p.mu * dtu + (p.mu + p.lam) * du + ker.xi_hat * du)
                                       + lap * ker.eta_hat * dtu)
    return float(np.sqrt(np.sum(np.abs(r1) ** 2))), float(np.sqrt(np.sum(np.abs(r2) ** 2)))
