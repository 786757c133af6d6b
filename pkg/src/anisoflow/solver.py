"""Damped Picard iteration with a homotopy walk, and (eps, delta) continuation.

A state (rho, u) solves the regularised system when rho solves the
continuity equation for u and u = h S(u) with the homotopy parameter h = 1.
Each sweep

    1. solves the continuity equation for the current u,
    2. measures both residuals on the fresh pair (rho, u),
    3. updates u <- (1 - r) u + r h S(u).

The damping r is halved after two consecutive residual increases; the run
stops on convergence, when r drops below ``min_relax`` or when the best
residual has not improved for ``stall_window`` sweeps.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import energy_terms
from .momentum import PowerConfig, momentum_residual, momentum_rhs
from .operators import GAUSSIAN, KernelSpec, MollifierSpec, PhysParams, invert_A
from .spectral import ScalarField, VectorField, mean
from .transport import TransportConfig, solve_transport, transport_residual

log = logging.getLogger(__name__)

CSV_COLUMNS = ("iteration", "r_mass", "r_mom", "energy_defect", "min_rho", "relax", "homotopy")


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 400
    relax: float = 0.5
    min_relax: float = 1e-3
    pos_tol: float = 1e-8
    rho_floor: float = 1e-14
    stall_window: int = 40
    transport_tol: float = 1e-13
    transport_max_iter: int = 2000
    homotopy_schedule: tuple = (1.0,)
    continuation_schedule: tuple = ((0.1, 0.1),)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("solver.tol must be positive")
        if not 0 < self.relax <= 1:
            raise ValueError("solver.relax must lie in (0, 1]")
        if not self.homotopy_schedule or abs(self.homotopy_schedule[-1] - 1.0) > 0:
            raise ValueError("schedule.homotopy must be nonempty and end at 1")
        if any(not 0 < h <= 1 for h in self.homotopy_schedule):
            raise ValueError("schedule.homotopy values must lie in (0, 1]")
        if not self.continuation_schedule:
            raise ValueError("schedule.continuation must be nonempty")
        prev = None
        for pair in self.continuation_schedule:
            e, d = pair
            if not (0 < e <= 1 and 0 < d <= 1):
                raise ValueError("schedule.continuation entries must lie in (0, 1]^2")
            if prev and (e > prev[0] or d > prev[1]):
                raise ValueError("schedule.continuation must be nonincreasing")
            prev = (e, d)

    @property
    def transport(self) -> TransportConfig:
        return TransportConfig(tol=self.transport_tol, max_iter=self.transport_max_iter,
                               pos_tol=self.pos_tol)

    @property
    def power(self) -> PowerConfig:
        return PowerConfig(rho_floor=self.rho_floor, pos_tol=self.pos_tol)


@dataclass
class SolverState:
    u: VectorField
    rho: ScalarField
    eps: float
    delta: float
    homotopy: float = 1.0
    iteration: int = 0
    residual_history: list = field(default_factory=list)
    r_mass: float = float("nan")
    r_mom: float = float("nan")
    relax: float = 0.5
    converged: bool = False
    message: str = ""
    log_rows: list = field(default_factory=list)

    @property
    def residual(self) -> float:
        return max(self.r_mass, self.r_mom)


def system_residual(state: SolverState, p: PhysParams, ker: KernelSpec, g: VectorField,
                    power_cfg: PowerConfig = PowerConfig(),
                    mollifier: MollifierSpec = GAUSSIAN) -> tuple[float, float]:
    """(r_mass, r_mom) assembled afresh from the state's fields."""
    r_mass = transport_residual(state.rho, state.u, p, state.eps, state.delta, mollifier)
    r_mom = momentum_residual(state.rho, state.u, p, ker, state.eps, state.delta, g,
                              state.homotopy, power_cfg, mollifier)
    return r_mass, r_mom


def _energy_defect(rho, u, p, ker, eps, delta, g, h):
    try:
        return energy_terms(rho, u, p, ker, eps, delta, g, h)["relative_defect"]
    except ValueError:
        return float("nan")


def fixed_point_solve(p: PhysParams, ker: KernelSpec, g: VectorField, eps: float, delta: float,
                      cfg: SolverConfig = SolverConfig(), warm_start: VectorField | None = None,
                      relax: float | None = None, track_energy: bool = True,
                      mollifier: MollifierSpec = GAUSSIAN) -> SolverState:
    """Solve the regularised system at fixed (eps, delta)."""
    grid = g.grid
    if warm_start is None:
        u = VectorField.zeros(grid)
    else:
        if not warm_start.is_mean_zero(1e-14):
            raise ValueError("warm start velocity must have zero mean")
        u = warm_start
    r = cfg.relax if relax is None else relax
    rho = None
    history, rows = [], []
    it = 0
    state = None
    for h in cfg.homotopy_schedule:
        best = None
        best_res = np.inf
        since_best = 0
        increases = 0
        prev = np.inf
        converged = False
        message = "max_iter reached"
        while True:
            tr = solve_transport(u, p, eps, delta, cfg.transport, rho0=rho, mollifier=mollifier)
            rho = tr.rho
            r_mass = tr.residual
            r_mom = momentum_residual(rho, u, p, ker, eps, delta, g, h, cfg.power, mollifier)
            res = max(r_mass, r_mom)
            if not np.isfinite(res):
                message = "non-finite residual"
                break
            it += 1
            history.append(res)
            ed = _energy_defect(rho, u, p, ker, eps, delta, g, h) if track_energy else float("nan")
            rows.append({"iteration": it, "r_mass": r_mass, "r_mom": r_mom, "energy_defect": ed,
                         "min_rho": tr.min_rho, "relax": r, "homotopy": h})
            if res < best_res:
                best = (u, rho, r_mass, r_mom)
                best_res = res
                since_best = 0
            else:
                since_best += 1
            if res <= cfg.tol:
                converged = True
                message = "converged"
                break
            if tr.negative:
                message = f"density undershoot (min rho {tr.min_rho:.3e})"
                break
            increases = increases + 1 if res > prev else 0
            prev = res
            if increases >= 2:
                r *= 0.5
                increases = 0
                if r < cfg.min_relax:
                    message = "relaxation fell below minimum"
                    break
            if since_best >= cfg.stall_window:
                message = "stalled"
                break
            if it >= cfg.max_iter:
                break
            rhs = momentum_rhs(rho, u, p, ker, eps, delta, g, cfg.power, mollifier)
            Su = invert_A(rhs, p, ker)
            u = VectorField(grid, spectral=(1 - r) * u.spectral + r * h * Su.spectral)
        bu, brho, bm, bmo = best if best is not None else (u, rho, np.nan, np.nan)
        state = SolverState(bu, brho, eps, delta, h, it, history, bm, bmo, r, converged, message, rows)
        if not converged:
            log.warning("solve at eps=%g delta=%g homotopy=%g stopped: %s (residual %.3e)",
                        eps, delta, h, message, best_res)
            return state
        u, rho = bu, brho
    return state


def continuation_run(p: PhysParams, ker: KernelSpec, g: VectorField, cfg: SolverConfig = SolverConfig(),
                     on_state=None, mollifier: MollifierSpec = GAUSSIAN) -> list[SolverState]:
    """Walk the (eps, delta) schedule, warm-starting each point from the last.

    The final damping of one point is carried to the next.  The walk stops
    at the first point that does not converge; the partial list (ending
    with the failed state) is returned.
    """
    states = []
    u = None
    relax = cfg.relax
    for eps, delta in cfg.continuation_schedule:
        st = fixed_point_solve(p, ker, g, eps, delta, cfg, warm_start=u, relax=relax, mollifier=mollifier)
        states.append(st)
        if on_state is not None:
            on_state(st)
        if not st.converged:
            break
        u = st.u
        relax = st.relax
    return states


def state_invariants(state: SolverState, p: PhysParams) -> dict:
    return {"mass_error": abs(mean(state.rho) - p.M),
            "mean_u": [float(x) for x in mean(state.u)]}
