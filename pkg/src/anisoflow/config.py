"""Flat ``key = value`` run configuration.

Lines look like ``phys.mu = 1.0``; ``#`` starts a comment.  Values are
Python literals (numbers, tuples, lists), except for the kernel shorthands
``zero`` and ``gaussian(sigma, amplitude)``.
"""
from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .multipliers import DEFAULT_C, DEFAULT_C0
from .operators import KernelSpec, PhysParams, kernel_hat
from .solver import SolverConfig
from .spectral import Grid, VectorField


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key {key!r}: {message}")


DEFAULTS: dict = {
    "grid.n": 16,
    "phys.mu": 1.0,
    "phys.lambda": 1.0,
    "phys.theta": 0.0,
    "phys.a": 1.0,
    "phys.gamma": 4.0,
    "phys.M": 1.0,
    "reg.eps": 0.1,
    "reg.delta": 0.1,
    "kernels.eta": "zero",
    "kernels.xi": "zero",
    "forcing.modes": [],
    "multiplier.C": DEFAULT_C,
    "multiplier.c0": DEFAULT_C0,
    "solver.tol": 1e-8,
    "solver.max_iter": 400,
    "solver.relax": 0.5,
    "solver.min_relax": 1e-3,
    "solver.pos_tol": 1e-8,
    "solver.rho_floor": 1e-14,
    "solver.stall_window": 40,
    "solver.transport_tol": 1e-13,
    "solver.transport_max_iter": 2000,
    "schedule.homotopy": [1.0],
    "schedule.continuation": None,
    "diagnose.rho": None,
    "diagnose.u": None,
    "diagnose.samples": 20,
}

_GAUSSIAN = re.compile(r"^gaussian\s*\(\s*([^,]+)\s*,\s*([^)]+)\)\s*$")


def _parse_value(key: str, text: str):
    text = text.strip()
    if key.startswith("kernels."):
        if text == "zero":
            return "zero"
        m = _GAUSSIAN.match(text)
        if m:
            try:
                return ("gaussian", float(m.group(1)), float(m.group(2)))
            except ValueError as exc:
                raise ConfigError(key, f"bad gaussian parameters in {text!r}") from exc
    if key.startswith("diagnose.") and key != "diagnose.samples":
        return text
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(key, f"cannot parse value {text!r}") from exc


def parse_config_text(text: str) -> dict:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown key")
        raw[key] = _parse_value(key, value)
    resolved = dict(DEFAULTS)
    resolved.update(raw)
    if resolved["schedule.continuation"] is None:
        resolved["schedule.continuation"] = [(resolved["reg.eps"], resolved["reg.delta"])]
    return resolved


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text())


def _number(cfg, key, kind=float):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    if kind is int and not float(v).is_integer():
        raise ConfigError(key, f"expected an integer, got {v!r}")
    return kind(v)


@dataclass
class RunSetup:
    grid: Grid
    params: PhysParams
    kernels: KernelSpec
    forcing: VectorField
    solver: SolverConfig
    eps: float
    delta: float
    C: float
    c0: float
    raw: dict = field(default_factory=dict)


def build_forcing(grid: Grid, modes, key: str = "forcing.modes") -> VectorField:
    """Sum of A sin(2 pi k.x) (or cos, with a third entry "cos") over the listed modes."""
    x = grid.x
    out = np.zeros((3,) + grid.shape)
    try:
        entries = list(modes)
    except TypeError as exc:
        raise ConfigError(key, "expected a list of (k, amplitudes) entries") from exc
    for entry in entries:
        if len(entry) not in (2, 3):
            raise ConfigError(key, f"bad entry {entry!r}")
        k, amp = entry[0], entry[1]
        kind = entry[2] if len(entry) == 3 else "sin"
        if len(k) != 3 or len(amp) != 3 or kind not in ("sin", "cos"):
            raise ConfigError(key, f"bad entry {entry!r}")
        if all(int(ki) == 0 for ki in k):
            raise ConfigError(key, "the k=0 mode is forbidden (forcing must have zero mean)")
        if any(abs(int(ki)) >= grid.n // 2 for ki in k):
            raise ConfigError(key, f"mode {tuple(k)} is not resolved on n={grid.n}")
        phase = 2 * np.pi * np.tensordot(np.asarray(k, float), x, axes=1)
        shape = np.sin(phase) if kind == "sin" else np.cos(phase)
        out += np.asarray(amp, float)[:, None, None, None] * shape
    return VectorField(grid, nodal=out)


def build_setup(cfg: dict) -> RunSetup:
    n = _number(cfg, "grid.n", int)
    try:
        grid = Grid(n)
    except ValueError as exc:
        raise ConfigError("grid.n", str(exc)) from exc
    params = PhysParams(
        mu=_number(cfg, "phys.mu"), lam=_number(cfg, "phys.lambda"), theta=_number(cfg, "phys.theta"),
        gamma=_number(cfg, "phys.gamma"), M=_number(cfg, "phys.M"), a=_number(cfg, "phys.a"),
    )
    kernels = {}
    for name in ("eta", "xi"):
        key = f"kernels.{name}"
        try:
            kernels[name] = kernel_hat(grid, cfg[key])
        except (ValueError, TypeError, IndexError) as exc:
            raise ConfigError(key, str(exc)) from exc
    try:
        ker = KernelSpec(grid, kernels["eta"], kernels["xi"])
    except ValueError as exc:
        raise ConfigError("kernels", str(exc)) from exc
    try:
        g = build_forcing(grid, cfg["forcing.modes"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("forcing.modes", str(exc)) from exc

    def seq(key):
        v = cfg[key]
        if not isinstance(v, (list, tuple)):
            raise ConfigError(key, "expected a list")
        return v

    eps, delta = _number(cfg, "reg.eps"), _number(cfg, "reg.delta")
    for key, v in (("reg.eps", eps), ("reg.delta", delta)):
        if not 0 < v <= 1:
            raise ConfigError(key, "must lie in (0, 1]")
    cont = seq("schedule.continuation")
    try:
        cont = tuple((float(e), float(d)) for e, d in cont)
    except (TypeError, ValueError) as exc:
        raise ConfigError("schedule.continuation", "expected a list of (eps, delta) pairs") from exc
    hom = tuple(float(h) for h in seq("schedule.homotopy"))
    try:
        solver = SolverConfig(
            tol=_number(cfg, "solver.tol"), max_iter=_number(cfg, "solver.max_iter", int),
            relax=_number(cfg, "solver.relax"), min_relax=_number(cfg, "solver.min_relax"),
            pos_tol=_number(cfg, "solver.pos_tol"), rho_floor=_number(cfg, "solver.rho_floor"),
            stall_window=_number(cfg, "solver.stall_window", int),
            transport_tol=_number(cfg, "solver.transport_tol"),
            transport_max_iter=_number(cfg, "solver.transport_max_iter", int),
            homotopy_schedule=hom, continuation_schedule=cont,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        msg = str(exc)
        key = msg.split()[0] if msg.split()[0].count(".") == 1 else "solver"
        raise ConfigError(key, msg) from exc
    return RunSetup(grid, params, ker, g, solver, eps, delta,
                    _number(cfg, "multiplier.C"), _number(cfg, "multiplier.c0"), cfg)
