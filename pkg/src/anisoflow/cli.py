"""Command line driver.

    anisoflow --config run.cfg --out results/ --mode solve [--strict] [--dump-fields] [--seed N]

Exit codes: 0 success, 1 configuration error, 2 non-convergence,
3 hypothesis failure under ``--strict``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, build_setup, load_config
from .diagnostics import diagnose
from .multipliers import check_hypothesis_H, multiplier_report
from .operators import SingularSymbolError, coercivity_bounds
from .solver import CSV_COLUMNS, SolverState, continuation_run, fixed_point_solve
from .spectral import ScalarField, VectorField, lp_norm, random_trig, read_field, write_field

log = logging.getLogger("anisoflow")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_HYPOTHESIS = 0, 1, 2, 3
MODES = ("check-hypotheses", "solve", "continuation", "diagnose")


# deterministic JSON --------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return "%.17g" % x


def to_json(obj, indent: int = 0) -> str:
    """JSON text with floats printed to 17 significant digits and keys in insertion order."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path: Path, obj) -> None:
    path.write_text(to_json(obj) + "\n")


def write_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([row[c] if isinstance(row[c], int) else "%.17g" % row[c] for c in CSV_COLUMNS])


# helpers -------------------------------------------------------------------------------


def _state_summary(st: SolverState) -> dict:
    return {
        "eps": st.eps, "delta": st.delta, "homotopy": st.homotopy,
        "converged": st.converged, "message": st.message, "iterations": st.iteration,
        "r_mass": st.r_mass, "r_mom": st.r_mom, "final_relax": st.relax,
        "residual_history": list(st.residual_history),
    }


def _state_report(setup, st: SolverState) -> dict:
    rep = diagnose(st.rho, st.u, setup.params, setup.kernels, setup.forcing, st.eps, st.delta,
                   st.homotopy, C=setup.C, c0=setup.c0, pos_tol=setup.solver.pos_tol,
                   power_cfg=setup.solver.power)
    return {"state": _state_summary(st), "diagnostics": rep.as_dict()}


def _dump(out: Path, tag: str, st: SolverState) -> None:
    write_field(out / f"rho{tag}.field", st.rho)
    write_field(out / f"u{tag}.field", st.u)


def _forcing_norm_sq(setup) -> float:
    return lp_norm(setup.forcing.nodal, 6 / 5) ** 2


def _continuation_bounds(setup, reports) -> dict:
    """Calibrate C(M, gamma)(|g|^2 + 1) on the first state; check the others against 1.1x."""
    if not reports:
        return {}
    gn = _forcing_norm_sq(setup)
    first = reports[0]["diagnostics"]["monitors"]["energy_lhs"]
    C_cal = first / (gn + 1.0)
    bound = 1.1 * C_cal * (gn + 1.0)
    names = ("delta_int_rho_gamma", "eps_grad_rho_half_gamma_sq", "energy_lhs")
    per_state = []
    ok = True
    for r in reports:
        m = r["diagnostics"]["monitors"]
        row = {k: bool(m[k] <= bound) for k in names}
        ok = ok and all(row.values())
        per_state.append(row)
    return {"calibration_C": C_cal, "forcing_L6/5_sq": gn, "bound": bound,
            "within_bound": per_state, "all_within_bound": ok}


def _random_coercivity(setup, rng: np.random.Generator, samples: int) -> dict:
    worst1 = worst2 = np.inf
    for _ in range(samples):
        u = random_trig(setup.grid, rng, rank=1, mean_zero=True)
        lhs, r1, r2 = coercivity_bounds(u, setup.params, setup.kernels)
        worst1 = min(worst1, lhs - r1)
        worst2 = min(worst2, lhs - r2)
    return {"samples": samples, "min_lhs_minus_rhs1": worst1, "min_lhs_minus_rhs2": worst2}


# modes ---------------------------------------------------------------------------------


def run(config_path, output_dir, mode: str = "solve", strict: bool = False,
        dump_fields: bool = False, seed: int = 0) -> int:
    """Execute one mode and write its reports; returns the exit code."""
    try:
        cfg = load_config(config_path)
        setup = build_setup(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"configuration error: cannot read {config_path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if mode not in MODES:
        print(f"configuration error: unknown mode {mode!r}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    p, ker, g = setup.params, setup.kernels, setup.forcing
    hyp = check_hypothesis_H(p, ker, g)
    header = {
        "program": "anisoflow", "version": __version__, "mode": mode, "seed": int(seed),
        "rng": "numpy Philox", "config": cfg, "hypothesis": hyp.as_dict(),
        "multiplier": multiplier_report(setup.grid, p, setup.C, setup.c0).as_dict(),
    }
    if not hyp.passed:
        msg = "(H) failed: " + ", ".join(hyp.failures)
        print(msg, file=sys.stderr)
        if strict:
            write_json(out / "report.json", header)
            return EXIT_HYPOTHESIS

    if mode == "check-hypotheses":
        write_json(out / "report.json", header)
        print(to_json({"hypothesis": header["hypothesis"], "multiplier": header["multiplier"]}))
        return EXIT_OK

    rng = np.random.Generator(np.random.Philox(int(seed)))
    try:
        if mode == "solve":
            st = fixed_point_solve(p, ker, g, setup.eps, setup.delta, setup.solver)
            write_csv(out / "iterations.csv", st.log_rows)
            header.update(_state_report(setup, st))
            write_json(out / "report.json", header)
            if dump_fields:
                _dump(out, "", st)
            return EXIT_OK if st.converged else EXIT_NONCONVERGED

        if mode == "continuation":
            states = continuation_run(p, ker, g, setup.solver)
            reports = []
            for i, st in enumerate(states):
                write_csv(out / f"iterations_{i:02d}.csv", st.log_rows)
                rep = _state_report(setup, st)
                write_json(out / f"state_{i:02d}.json", dict(header, index=i, **rep))
                reports.append(rep)
                if dump_fields:
                    _dump(out, f"_{i:02d}", st)
            header["states"] = reports
            header["uniform_bounds"] = _continuation_bounds(setup, reports)
            header["completed"] = len(states) == len(setup.solver.continuation_schedule) and states[-1].converged
            write_json(out / "report.json", header)
            return EXIT_OK if header["completed"] else EXIT_NONCONVERGED

        # diagnose
        if cfg["diagnose.rho"] and cfg["diagnose.u"]:
            base = Path(config_path).parent
            rho = read_field(base / cfg["diagnose.rho"])
            u = read_field(base / cfg["diagnose.u"])
            if not isinstance(rho, ScalarField) or not isinstance(u, VectorField):
                print("configuration error: config key 'diagnose.rho'/'diagnose.u': wrong field kinds",
                      file=sys.stderr)
                return EXIT_CONFIG
            st = SolverState(u, rho, setup.eps, setup.delta, converged=True, message="loaded")
        else:
            st = fixed_point_solve(p, ker, g, setup.eps, setup.delta, setup.solver)
            write_csv(out / "iterations.csv", st.log_rows)
        header.update(_state_report(setup, st))
        header["coercivity_sampling"] = _random_coercivity(setup, rng, int(cfg["diagnose.samples"]))
        write_json(out / "report.json", header)
        if dump_fields:
            _dump(out, "", st)
        return EXIT_OK if st.converged else EXIT_NONCONVERGED
    except SingularSymbolError as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anisoflow", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="flat key = value configuration file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--mode", choices=MODES, default="solve")
    ap.add_argument("--strict", action="store_true", help="exit 3 if the hypothesis check fails")
    ap.add_argument("--dump-fields", action="store_true", help="write binary field dumps")
    ap.add_argument("--seed", type=int, default=0, help="seed for random probes (u64)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not 0 <= args.seed < 2**64:
        print("configuration error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.config, args.out, args.mode, args.strict, args.dump_fields, args.seed)


if __name__ == "__main__":
    sys.exit(main())
