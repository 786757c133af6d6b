"""Residual diagnostics for converged (and trial) states.

Weak-form quantities are measured against the fixed test set of all
trigonometric modes with max|k_i| <= 2.  For a field D the pairing with the
mode k is its Fourier coefficient D_hat(k); weak norms are the l2 norm (or
max) of those coefficients over the test set.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import multipliers as mult
from .momentum import PowerConfig, momentum_residual, power_values, rho_power
from .operators import (
    GAUSSIAN,
    KernelSpec,
    MollifierSpec,
    PhysParams,
    apply_A,
    convolve,
    coercivity_bounds,
    dissipation,
    div_theta,
    longitudinal_operator,
    mollify,
    quadratic_form_C,
    theta_k2,
)
from .spectral import (
    AXES,
    Grid,
    ScalarField,
    VectorField,
    div,
    from_padded,
    gradient_tensor,
    lp_norm,
    mean,
    project_mean_zero,
    resample,
)
from .transport import transport_residual

TEST_KMAX = 2


def test_modes(grid: Grid, kmax: int = TEST_KMAX) -> np.ndarray:
    """Boolean mask of the weak-form test modes."""
    return np.all(np.abs(grid.k) <= kmax, axis=0)


def weak_coefficients(values: np.ndarray, kmax: int = TEST_KMAX) -> np.ndarray:
    """Test-mode coefficients of nodal values on any grid."""
    fine = Grid(values.shape[-1])
    s = np.fft.fftn(values, axes=AXES) / fine.size
    return s[..., test_modes(fine, kmax)]


def weak_norm(values: np.ndarray, kmax: int = TEST_KMAX) -> float:
    return float(np.sqrt(np.sum(np.abs(weak_coefficients(values, kmax)) ** 2)))


def _fine(f, n2):
    return resample(f, n2)


def _grad_nodal(f: ScalarField) -> np.ndarray:
    return np.fft.ifftn(2j * np.pi * f.grid.kd * f.spectral, axes=AXES).real * f.grid.size


# energy ---------------------------------------------------------------------------------


def energy_terms(rho: ScalarField, u: VectorField, p: PhysParams, ker: KernelSpec, eps: float,
                 delta: float, g: VectorField, homotopy: float = 1.0,
                 mollifier: MollifierSpec = GAUSSIAN) -> dict:
    """The six terms of the energy balance and their defect.

    For an exact solution of the regularised system,

        -(1/h) int <Au,u> + (delta M/2) int |u|^2 + (4 a eps/gamma) int |grad rho^{gamma/2}|^2
        + (a gamma delta/(gamma-1)) int rho^gamma
        - int (omega * g).u - (a gamma delta M/(gamma-1)) int rho^{gamma-1} = 0.

    Integrals are evaluated by quadrature on the doubled grid.
    """
    gam, a = p.gamma, p.a
    n2 = 2 * rho.grid.n
    rf = _fine(rho, n2)
    R = rf.nodal
    if R.min() <= 0 and not float(gam).is_integer():
        raise ValueError("energy terms need a positive density")
    grho = _grad_nodal(rf)
    # |grad rho^{g/2}|^2 = (g^2/4) rho^{g-2} |grad rho|^2
    grad_pow = (gam**2 / 4) * np.mean(power_values(R, gam - 2) * np.sum(grho**2, axis=0))
    int_rg = float(np.mean(power_values(R, gam)))
    int_rg1 = float(np.mean(power_values(R, gam - 1)))
    wg = mollify(project_mean_zero(g), delta, mollifier)
    terms = {
        "dissipation": dissipation(u, p, ker) / homotopy,
        "kinetic": 0.5 * delta * p.M * float(np.sum(np.abs(u.spectral) ** 2)),
        "density_gradient": 4 * a * eps / gam * grad_pow,
        "pressure": a * gam * delta / (gam - 1) * int_rg,
        "forcing": float(np.sum(np.real(np.conj(wg.spectral) * u.spectral))),
        "mass_pressure": a * gam * delta * p.M / (gam - 1) * int_rg1,
    }
    defect = (terms["dissipation"] + terms["kinetic"] + terms["density_gradient"] + terms["pressure"]
              - terms["forcing"] - terms["mass_pressure"])
    scale = max(abs(v) for v in terms.values())
    terms["defect"] = defect
    terms["relative_defect"] = abs(defect) / scale if scale > 0 else 0.0
    terms["int_rho_gamma"] = int_rg
    terms["int_grad_rho_half_gamma_sq"] = float(grad_pow)
    return terms


def energy_lhs(terms: dict) -> float:
    """Left side of the uniform energy bound."""
    return (0.5 * terms["dissipation"] + terms["kinetic"] + terms["density_gradient"]
            + 0.5 * terms["pressure"])


def monitors(rho: ScalarField, u: VectorField, p: PhysParams, ker: KernelSpec, eps: float,
             delta: float, g: VectorField, terms: dict | None = None) -> dict:
    """Quantities that stay bounded uniformly in (eps, delta)."""
    terms = terms or energy_terms(rho, u, p, ker, eps, delta, g)
    gam = p.gamma
    n2 = 2 * rho.grid.n
    R = _fine(rho, n2)
    G = gradient_tensor(_fine(u, n2))
    grho = _grad_nodal(R)
    cross = np.einsum("ij...,j...->i...", G, grho)
    q = 3 * (gam - 1) / (2 * gam - 1)
    return {
        "delta_int_rho_gamma": delta * terms["int_rho_gamma"],
        "eps_grad_rho_half_gamma_sq": eps * terms["int_grad_rho_half_gamma_sq"],
        "dissipation": terms["dissipation"],
        "energy_lhs": energy_lhs(terms),
        "rho_L3(gamma-1)": lp_norm(R.nodal, 3 * (gam - 1)),
        "grad_u_L3(gamma-1)/gamma": lp_norm(G, 3 * (gam - 1) / gam),
        "eps_cross_L3(gamma-1)/(2gamma-1)": eps * lp_norm(cross, q),
    }


# effective fluxes -----------------------------------------------------------------------


def _inverse_symbol(sym: np.ndarray) -> np.ndarray:
    out = np.zeros_like(sym)
    nz = sym != 0
    out[nz] = 1.0 / sym[nz]
    return out


def longitudinal_inverse_laplacian(grid: Grid, p: PhysParams) -> np.ndarray:
    """Symbol of L^{-1} Delta on mean-zero fields, L = mu Delta_theta + (mu+lam) Delta."""
    return -4 * np.pi**2 * grid.k2 * _inverse_symbol(longitudinal_operator(grid, p))


@dataclass
class Fluxes:
    F: ScalarField
    F_an: ScalarField
    tildeF_an: ScalarField
    tildeF_gen: ScalarField

    def norms(self) -> dict:
        return {name: float(np.sqrt(np.sum(np.abs(getattr(self, name).spectral) ** 2)))
                for name in ("F", "F_an", "tildeF_an", "tildeF_gen")}


def effective_fluxes(rho: ScalarField, u: VectorField, p: PhysParams, ker: KernelSpec,
                     power_cfg: PowerConfig = PowerConfig()) -> Fluxes:
    """Isotropic flux F, the pressure-split flux F_an and the div_theta fluxes.

    F        = (2mu+lam) div u - a rho^gamma
    F_an     = (2mu+lam) div u - (a int rho^gamma + (2mu+lam) L^{-1} Delta (a rho^gamma - mean))
    tildeF   = mu div_theta u - a rho^gamma
    tildeF_g = mu div_theta u + (mu+lam) div u + xi * div u - a rho^gamma
    """
    grid = rho.grid
    P = rho_power(rho, p.gamma, power_cfg) * p.a
    du = div(u)
    dtu = div_theta(u, p)
    F = du * p.nu - P
    split = project_mean_zero(P).spectral * longitudinal_inverse_laplacian(grid, p) * p.nu
    split[0, 0, 0] = P.spectral[0, 0, 0]
    F_an = du * p.nu - ScalarField(grid, spectral=split)
    tF = dtu * p.mu - P
    tG = dtu * p.mu + du * (p.mu + p.lam) + convolve(ker.xi_hat, du) - P
    return Fluxes(F, F_an, tF, tG)


def manufactured_forcing(rho: ScalarField, u: VectorField, p: PhysParams, ker: KernelSpec,
                         eps: float, power_cfg: PowerConfig = PowerConfig()) -> VectorField:
    """g making (rho, u) an exact solution of
    -A u + div(rho u (x) u) + grad(a rho^gamma) + eps grad u grad rho = g."""
    grid = rho.grid
    n2 = 2 * grid.n
    R, U = _fine(rho, n2).nodal, _fine(u, n2).nodal
    fg = Grid(n2)
    flux = np.fft.fftn(R * U[:, None] * U[None, :], axes=AXES)
    conv = np.fft.ifftn(2j * np.pi * np.sum(fg.kd[:, None] * flux, axis=0), axes=AXES).real
    G = gradient_tensor(_fine(u, n2))
    cross = np.einsum("ij...,j...->i...", G, _grad_nodal(_fine(rho, n2)))
    nl = from_padded(conv + eps * cross, grid)
    P = rho_power(rho, p.gamma, power_cfg) * p.a
    gp = VectorField(grid, spectral=2j * np.pi * grid.kd * P.spectral)
    return nl - apply_A(u, p, ker) + gp


def anisotropic_flux_residual(rho: ScalarField, u: VectorField, p: PhysParams, ker: KernelSpec,
                              g: VectorField, eps: float,
                              power_cfg: PowerConfig = PowerConfig()) -> float:
    """L2 defect of
    -Delta_theta tildeF_g = Delta eta * div_theta u + div_theta g
                            - div_theta div(rho u (x) u) - eps div_theta(grad u grad rho),
    assembled directly from the fields (no use of the operator A)."""
    grid = rho.grid
    n2 = 2 * grid.n
    fl = effective_fluxes(rho, u, p, ker, power_cfg).tildeF_gen
    lhs = 4 * np.pi**2 * theta_k2(grid, p.theta) * fl.spectral
    R, U = _fine(rho, n2).nodal, _fine(u, n2).nodal
    fg = Grid(n2)
    T = np.fft.fftn(R * U[:, None] * U[None, :], axes=AXES) / fg.size   # T[i, j] = rho u_i u_j
    w = np.array([1.0, 1.0, 1 + p.theta])[:, None, None, None]
    kd = fg.kd
    divdiv = -4 * np.pi**2 * np.einsum("i...,j...,ij...->...", w * kd, kd, T)
    G = gradient_tensor(_fine(u, n2))
    cross = np.einsum("ij...,j...->i...", G, _grad_nodal(_fine(rho, n2)))
    cs = np.fft.fftn(cross, axes=AXES) / fg.size
    dcross = 2j * np.pi * np.sum(w * kd * cs, axis=0)
    nl = from_padded(np.fft.ifftn(-divdiv - eps * dcross, axes=AXES).real * fg.size, grid)
    rhs = (-4 * np.pi**2 * grid.k2 * ker.eta_hat * div_theta(u, p).spectral
           + div_theta(g, p).spectral + nl.spectral)
    r = lhs - rhs
    r[0, 0, 0] = 0.0
    return float(np.sqrt(np.sum(np.abs(r) ** 2)))


# stability identity -------------------------------------------------------------------


def identity_defect(rho: ScalarField, u: VectorField, rho_gamma_bar: ScalarField, C_bar: ScalarField,
                    p: PhysParams, power_cfg: PowerConfig = PowerConfig()) -> float:
    """Largest test-mode pairing of

        (1/(gamma-1)) div(u (bar - rho^gamma)) + (bar - rho^gamma) div u + C_bar - C(u,u).
    """
    grid = rho.grid
    n2 = 2 * grid.n
    X = (rho_gamma_bar - rho_power(rho, p.gamma, power_cfg))
    Xf = _fine(X, n2).nodal
    uf = _fine(u, n2)
    U = uf.nodal
    d1 = div(VectorField(uf.grid, nodal=U * Xf[None])).nodal / (p.gamma - 1)
    d2 = Xf * div(uf).nodal
    D = d1 + d2 + _fine(C_bar - quadratic_form_C(u, p), n2).nodal
    return float(np.max(np.abs(weak_coefficients(D)))) if D.size else 0.0


# renormalisation and commutators ---------------------------------------------------------


def renorm_density(rho: ScalarField, u: VectorField, b: float,
                   power_cfg: PowerConfig = PowerConfig()) -> np.ndarray:
    """Nodal values (doubled grid) of div(rho^b u) + (b-1) rho^b div u."""
    n2 = 2 * rho.grid.n
    R = _fine(rho, n2).nodal
    uf = _fine(u, n2)
    Rb = power_values(R, b, power_cfg)
    return div(VectorField(uf.grid, nodal=Rb[None] * uf.nodal)).nodal + (b - 1) * Rb * div(uf).nodal


def renorm_residual(rho: ScalarField, u: VectorField, b: float, delta: float | None = None,
                    power_cfg: PowerConfig = PowerConfig(),
                    mollifier: MollifierSpec = GAUSSIAN) -> float:
    """Weak norm of div(rho^b v) + (b-1) rho^b div v.

    With ``delta`` given, v is the transport velocity omega_delta * u;
    otherwise v = u.
    """
    if b <= 0:
        raise ValueError("renormalisation exponent must be positive")
    v = u if delta is None else mollify(u, delta, mollifier)
    return weak_norm(renorm_density(rho, v, b, power_cfg))


def continuity_pollution(rho: ScalarField, u: VectorField, p: PhysParams, eps: float, delta: float,
                         mollifier: MollifierSpec = GAUSSIAN) -> float:
    """Weak norm of eps Delta rho - delta(rho - M) + div(rho (u - omega_delta * u)).

    For a solution of the continuity equation this equals the b=1
    renormalisation residual taken with the velocity u itself.
    """
    grid = rho.grid
    n2 = 2 * grid.n
    s = -4 * np.pi**2 * eps * grid.k2 * rho.spectral - delta * rho.spectral
    s = s.copy()
    s[0, 0, 0] += delta * p.M
    lin = resample(ScalarField(grid, spectral=s), n2).nodal
    diff = u - mollify(u, delta, mollifier)
    R = _fine(rho, n2).nodal
    df = _fine(diff, n2)
    return weak_norm(lin + div(VectorField(df.grid, nodal=R[None] * df.nodal)).nodal)


def commutator_residual(a: ScalarField, b: ScalarField, delta_list, direction: int = 0,
                        mollifier: MollifierSpec = GAUSSIAN) -> dict:
    """||d_i(a_delta b) - d_i((a b)_delta)||_2 for each delta, products taken exactly."""
    n2 = 2 * a.grid.n
    af, bf = _fine(a, n2), _fine(b, n2)
    fg = af.grid
    out = {}
    for delta in delta_list:
        om = mollifier.symbol(fg, delta)
        ad = ScalarField(fg, spectral=om * af.spectral).nodal
        ab = np.fft.fftn(af.nodal * bf.nodal) / fg.size
        first = np.fft.fftn(ad * bf.nodal) / fg.size
        r = 2j * np.pi * fg.kd[direction] * (first - om * ab)
        out[float(delta)] = float(np.sqrt(np.sum(np.abs(r) ** 2)))
    return out


# pressure bootstrap ------------------------------------------------------------------------


def default_alpha(gamma: float) -> float:
    return 2 * gamma - 3


def bootstrap_terms(rho: ScalarField, u: VectorField, p: PhysParams, ker: KernelSpec, g: VectorField,
                    eps: float, alpha: float | None = None,
                    power_cfg: PowerConfig = PowerConfig()) -> dict:
    """The pressure split a rho^gamma = T1 + ... + T7 and its weighted integrals.

    With L = mu Delta_theta + (mu+lam) Delta and nu = 2mu+lam:

        T1 = a int rho^gamma                       T5 = nu L^{-1} div g
        T2 = nu div u                              T6 = -nu L^{-1} div div(rho u (x) u)
        T3 = m(D)(a rho^gamma - mean)              T7 = -eps nu L^{-1} div(grad u grad rho)
        T4 = nu L^{-1} Delta((eta + xi) * div u)

    The split is exact for solutions of the eps-level momentum equation;
    its residual is reported.  Each field is weighted by rho^alpha and integrated.
    """
    gam = p.gamma
    alpha = default_alpha(gam) if alpha is None else float(alpha)
    if alpha <= 0 or 2 * alpha <= gam:
        raise ValueError(f"alpha={alpha} violates alpha > 0 and 2 alpha > gamma")
    if alpha > 2 * gam - 3:
        raise ValueError(f"alpha={alpha} exceeds 2 gamma - 3")
    grid = rho.grid
    n2 = 2 * grid.n
    nu = p.nu
    Linv = _inverse_symbol(longitudinal_operator(grid, p))
    P = rho_power(rho, gam, power_cfg) * p.a
    du = div(u)
    g0 = project_mean_zero(g)

    T = {}
    T["T1"] = ScalarField(grid, spectral=np.zeros(grid.shape, complex)) + mean(P)
    T["T2"] = du * nu
    T["T3"] = mult.apply_pressure_correction(project_mean_zero(P), p)
    kdu = convolve(ker.eta_hat + ker.xi_hat, du)
    T["T4"] = ScalarField(grid, spectral=nu * Linv * (-4 * np.pi**2 * grid.k2) * kdu.spectral)
    T["T5"] = ScalarField(grid, spectral=nu * Linv * div(g0).spectral)

    R, U = _fine(rho, n2).nodal, _fine(u, n2).nodal
    fg = Grid(n2)
    flux = np.fft.fftn(R * U[:, None] * U[None, :], axes=AXES) / fg.size
    dd = -4 * np.pi**2 * np.einsum("i...,j...,ij...->...", fg.kd, fg.kd, flux)
    dd = from_padded(np.fft.ifftn(dd, axes=AXES).real * fg.size, grid)
    T["T6"] = ScalarField(grid, spectral=-nu * Linv * dd.spectral)
    G = gradient_tensor(_fine(u, n2))
    cross = from_padded(np.einsum("ij...,j...->i...", G, _grad_nodal(_fine(rho, n2))), grid)
    T["T7"] = ScalarField(grid, spectral=-eps * nu * Linv * div(cross).spectral)

    total = sum(T.values(), ScalarField(grid, spectral=np.zeros(grid.shape, complex)))
    split_residual = float(np.sqrt(np.sum(np.abs((P - total).spectral) ** 2)))

    Rf = R
    wgt = power_values(Rf, alpha, power_cfg)
    integrals = {name: float(np.mean(wgt * _fine(f, n2).nodal)) for name, f in T.items()}
    int_ag = p.a * float(np.mean(power_values(Rf, alpha + gam, power_cfg)))
    s = mult.smallness_value(p)
    ratio = abs(integrals["T3"]) / int_ag if int_ag > 0 else 0.0
    return {
        "alpha": alpha,
        "integrals": integrals,
        "split_residual": split_residual,
        "pressure_norm": float(np.sqrt(np.sum(np.abs(P.spectral) ** 2))),
        "int_a_rho_alpha_gamma": int_ag,
        "T2_nonpositive": integrals["T2"] <= 0.0,
        "T3_ratio": ratio,
        "smallness_value": s,
        "T3_within_smallness": ratio <= 1.1 * s,
    }


# report ----------------------------------------------------------------------------------


@dataclass
class DiagnosticsReport:
    values: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return self.values


def diagnose(rho: ScalarField, u: VectorField, p: PhysParams, ker: KernelSpec, g: VectorField,
             eps: float, delta: float, homotopy: float = 1.0, renorm_exponents=None,
             commutator_deltas=(1e-1, 1e-2, 1e-3), C: float = mult.DEFAULT_C,
             c0: float = mult.DEFAULT_C0, pos_tol: float = 1e-8,
             power_cfg: PowerConfig = PowerConfig()) -> DiagnosticsReport:
    """Evaluate every diagnostic on one state."""
    grid = rho.grid
    terms = energy_terms(rho, u, p, ker, eps, delta, g, homotopy)
    lhs, rhs1, rhs2 = coercivity_bounds(u, p, ker)
    fl = effective_fluxes(rho, u, p, ker, power_cfg)
    exps = renorm_exponents or (1.0, p.gamma)
    renorm = {str(float(b)): renorm_residual(rho, u, b, delta, power_cfg) for b in exps}
    P = rho_power(rho, p.gamma, power_cfg)
    comm = commutator_residual(rho, u[0], commutator_deltas)
    try:
        boot = bootstrap_terms(rho, u, p, ker, g, eps, None, power_cfg)
    except ValueError as exc:
        boot = {"error": str(exc)}
    mu = mean(u)
    vals = {
        "mass_error": abs(mean(rho) - p.M),
        "mean_u_error": float(np.max(np.abs(mu))),
        "min_rho": float(rho.nodal.min()),
        "accepted_density": bool(rho.nodal.min() >= -pos_tol),
        "r_mass": transport_residual(rho, u, p, eps, delta),
        "r_mom": momentum_residual(rho, u, p, ker, eps, delta, g, homotopy, power_cfg),
        "energy_defect": terms["relative_defect"],
        "energy_terms": terms,
        "monitors": monitors(rho, u, p, ker, eps, delta, g, terms),
        "coercivity_lhs": lhs,
        "coercivity_rhs1": rhs1,
        "coercivity_rhs2": rhs2,
        "flux_norms": fl.norms(),
        "renorm_residuals": renorm,
        "commutator_residuals": {str(k): v for k, v in comm.items()},
        "pressure_mean": mean(P) * p.a,
        "bootstrap_terms": boot,
        "multiplier": mult.multiplier_report(grid, p, C, c0).as_dict(),
    }
    return DiagnosticsReport(vals)
