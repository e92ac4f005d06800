"""Command-line front end: floquet / analyze / sweep / report.

Exit codes: 0 success, 1 computational failure (diagnostics in the output
document), 2 usage or configuration error (message names the offending
field).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, problems
from ._serialize import dump_csv, dump_json, load_json
from .cycle import DEFAULT_CLUSTER_TOL, check_nondegenerate, monodromy
from .errors import ConfigError, CycleShiftError, DomainError
from .floquet import adjoint_fundamental, floquet_basis, floquet_diagnostics
from .ode import backend_name
from .ode.integrate import DEFAULT_TOL
from .perturb import (
    PeriodicSolution,
    QUAD_ABS_TOL,
    build_surface,
    find_periodic_solution,
    malkin_grid,
    mperp_grid,
    scalar_projection,
    shift_box_radius,
    shifted_deviation,
    solve_shift,
)

SCHEMA = "cycleshift/v1"

_TOLERANCES = {
    "default_tol": DEFAULT_TOL,
    "cycle_orbit_tol": 1e-12,
    "solution_orbit_tol": 1e-11,
    "shift_tol": 1e-11,
    "quad_abs_tol": QUAD_ABS_TOL,
    "cluster_tol": DEFAULT_CLUSTER_TOL,
}


def _problem_hash(resolved) -> str:
    desc = {
        "name": resolved.spec.name,
        "params": {k: resolved.spec.params[k] for k in sorted(resolved.spec.params)},
        "T": resolved.problem.period,
        "dimension": resolved.problem.dimension,
    }
    return hashlib.sha256(json.dumps(desc, sort_keys=True).encode()).hexdigest()[:16]


def _metadata(resolved, mode: str | None = None) -> dict:
    meta = {
        "tool": "cycleshift",
        "version": __version__,
        "schema": SCHEMA,
        "backend": backend_name(),
        "threads": analysis.worker_count(),
        "problem": resolved.spec.name,
        "problem_hash": _problem_hash(resolved),
        "params": {k: resolved.spec.params[k] for k in sorted(resolved.spec.params)},
        "tolerances": dict(_TOLERANCES),
    }
    if mode is not None:
        meta["surface_mode"] = mode
    return meta


def _document(kind: str, metadata: dict, payload: dict) -> dict:
    return {"schema": SCHEMA, "kind": kind, "metadata": metadata, "payload": payload}


def _resolve_from_args(args) -> problems.ResolvedProblem:
    params = {}
    if getattr(args, "params", None):
        try:
            params = json.loads(args.params)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config field 'params': invalid JSON ({exc})") from exc
        if not isinstance(params, dict):
            raise ConfigError("config field 'params': must be a JSON object")
    if args.config and args.problem:
        raise ConfigError("config field 'problem': conflicts with --config (give one)")
    if args.config:
        spec = problems.load_problem_config(args.config)
        return problems.resolve_spec(spec)
    if not args.problem:
        raise ConfigError("config field 'problem': one of --problem/--config is required")
    return problems.resolve(args.problem, params)


def _multiplier_list(mono) -> list[dict]:
    return [
        {"value_re": m.value.real, "value_im": m.value.imag, "multiplicity": m.multiplicity}
        for m in mono.multipliers
    ]


def _floquet_payload(resolved, grid_n: int) -> dict:
    problem, cycle = resolved.problem, resolved.cycle
    mono = monodromy(cycle.field, cycle)
    cert = check_nondegenerate(mono)
    basis = floquet_basis(cycle)
    diag = floquet_diagnostics(basis, cycle)
    Z_T = adjoint_fundamental(cycle, cycle.period)
    adj_eigs = np.sort(np.linalg.eigvals(Z_T).real)

    ts = np.linspace(0.0, cycle.period, grid_n)
    entries = []
    for e in basis.entries:
        entries.append({
            "id": e.entry_id,
            "multiplier": e.multiplier,
            "periodic": e.periodic,
            "normalization": e.normalization,
            "initial": e.initial(),
            "samples_t": ts,
            "samples_z": e.trajectory.eval(ts),
        })
    return {
        "cycle": {
            "anchor": cycle.anchor,
            "period": cycle.period,
            "residual": cycle.residual,
            "closure_defect": cycle.closure_defect,
        },
        "multipliers": _multiplier_list(mono),
        "nondegenerate": cert.nondegenerate,
        "unit_multiplier_multiplicity": cert.unit_multiplier_multiplicity,
        "gap": cert.gap,
        "adjoint_multipliers": list(adj_eigs),
        "entries": entries,
        "diagnostics": {
            "perron_defect": diag.perron_defect,
            "orthogonality_defect": diag.orthogonality_defect,
            "lemma_ei_defect": diag.lemma_ei_defect,
            "sign_convention": diag.sign_convention,
            "initial_condition_number": basis.initial_condition_number,
        },
    }


def _analyze_payload(resolved, eps: float, mode: str, r0: float | None,
                     grid_m: int, use_oracle: bool) -> dict:
    problem, cycle = resolved.problem, resolved.cycle
    basis = floquet_basis(cycle)
    surface = build_surface(cycle, mode=mode)
    r0_val = r0 if r0 is not None else shift_box_radius(cycle)

    if use_oracle and problem.solution_oracle is not None:
        x_eps = PeriodicSolution.from_oracle(problem, eps)
    else:
        x_eps = find_periodic_solution(problem, eps, cycle)
    shift = solve_shift(x_eps, surface, r0=r0_val)
    shifted = shifted_deviation(x_eps, cycle, shift.delta, grid_m)
    unshifted = shifted_deviation(x_eps, cycle, 0.0, grid_m)

    ts = np.linspace(0.0, cycle.period, 17)
    bif = {}
    theorem2 = {}
    for e in basis.nonperiodic_entries:
        table = mperp_grid(e, cycle, problem, ts)
        bif[e.entry_id] = {
            "multiplier": e.multiplier,
            "t": [bv.t for bv in table],
            "mperp": [bv.value for bv in table],
        }
        defects = []
        for bv in table:
            sp = scalar_projection(x_eps, shift.delta, e, cycle, bv.t)
            defects.append(abs(sp - bv.value) / (1.0 + abs(bv.value)))
        theorem2[e.entry_id] = {"max_relative_defect": max(defects)}
    mk = malkin_grid(basis.periodic_entry, cycle, problem, ts)

    config = analysis.SweepConfig(
        eps_grid=(eps,), mode=mode, r0=r0, grid_size=grid_m,
        use_solution_oracle=use_oracle and problem.solution_oracle is not None,
        use_shift_oracle=use_oracle and problem.shift_oracle is not None,
    )
    corollaries = analysis.corollary_checks(problem, cycle, basis, (eps,), config)

    return {
        "eps": eps,
        "mode": mode,
        "r0": r0_val,
        "solution": {
            "residual": x_eps.residual,
            "iterations": x_eps.iterations,
            "source": x_eps.source,
            "oracle_defect": x_eps.oracle_defect,
            "warnings": list(x_eps.warnings),
        },
        "shift": {
            "delta": shift.delta,
            "v": shift.v,
            "residual": shift.residual,
            "iterations": shift.iterations,
        },
        "deviation": {
            "t": shifted.ts,
            "shifted": shifted.values,
            "unshifted": unshifted.values,
            "sup_shifted": shifted.sup,
            "sup_unshifted": unshifted.sup,
            "sup_shifted_over_eps": shifted.sup_over_eps,
            "sup_unshifted_over_eps": unshifted.sup_over_eps,
        },
        "trajectory_samples": x_eps.eval(shifted.ts + shift.delta),
        "mperp": bif,
        "malkin": {"t": [bv.t for bv in mk], "values": [bv.value for bv in mk]},
        "theorem2": theorem2,
        "corollaries": [
            {"check": o.check, "status": o.status, "details": o.details,
             "annotations": list(o.annotations)}
            for o in corollaries.outcomes
        ],
    }


CSV_COLUMNS = ["eps", "delta", "v_norm", "sup_shifted", "sup_unshifted",
               "residual_solution", "residual_shift", "mode"]


def _sweep_payload(resolved, config: analysis.SweepConfig) -> tuple[dict, list[list]]:
    report = analysis.sweep(resolved.problem, resolved.cycle, config)
    records = []
    rows = []
    for r in report.records:
        records.append({
            "eps": r.eps,
            "delta": r.delta,
            "v_norm": r.v_norm,
            "sup_shifted": r.sup_shifted,
            "sup_unshifted": r.sup_unshifted,
            "residual_solution": r.residual_solution,
            "residual_shift": r.residual_shift,
            "solution_iterations": r.solution_iterations,
            "shift_iterations": r.shift_iterations,
            "warnings": list(r.warnings),
            "error": r.error,
        })
        rows.append([r.eps, r.delta, r.v_norm, r.sup_shifted, r.sup_unshifted,
                     r.residual_solution, r.residual_shift, report.mode])

    def fit_dict(fit):
        if fit is None:
            return None
        return {"p": fit.p, "c": fit.c, "fit_residual": fit.fit_residual,
                "n_points": fit.n_points}

    payload = {
        "config": {
            "eps_grid": list(config.eps_grid),
            "mode": config.mode,
            "r0": report.r0,
            "grid_size": config.grid_size,
            "use_solution_oracle": config.use_solution_oracle,
            "use_shift_oracle": config.use_shift_oracle,
        },
        "records": records,
        "fitted": report.fitted,
        "order_shifted": fit_dict(report.shifted_fit),
        "order_unshifted": fit_dict(report.unshifted_fit),
        "bound_constant": report.bound_constant,
        "workers": report.workers,
    }
    return payload, rows


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cycleshift",
        description="phase shifts and bifurcation functions for periodically "
                    "perturbed limit cycles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_problem_args(p):
        p.add_argument("--problem", help=f"registry problem ({', '.join(problems.problem_names())})")
        p.add_argument("--config", help="JSON problem configuration file")
        p.add_argument("--params", help="JSON object with parameter overrides")
        p.add_argument("--out", help="output JSON path")

    p_floquet = sub.add_parser("floquet", help="multipliers, nondegeneracy, eigenfunctions")
    add_problem_args(p_floquet)
    p_floquet.add_argument("--grid", type=int, default=17, help="eigenfunction sample count")

    p_analyze = sub.add_parser("analyze", help="one eps end-to-end")
    add_problem_args(p_analyze)
    p_analyze.add_argument("--eps", required=True, type=float)
    p_analyze.add_argument("--mode", choices=["section", "flowed"], default="section")
    p_analyze.add_argument("--r0", type=float, default=None)
    p_analyze.add_argument("--grid-m", type=int, default=64)
    p_analyze.add_argument("--use-oracle", action="store_true",
                           help="use closed-form solution/shift oracles when available")

    p_sweep = sub.add_parser("sweep", help="eps grid with order fits")
    add_problem_args(p_sweep)
    p_sweep.add_argument("--eps", required=True, help="comma-separated decreasing eps grid")
    p_sweep.add_argument("--mode", choices=["section", "flowed"], default="section")
    p_sweep.add_argument("--r0", type=float, default=None)
    p_sweep.add_argument("--grid-m", type=int, default=64)
    p_sweep.add_argument("--use-oracle", action="store_true")
    p_sweep.add_argument("--csv", help="CSV output path (default: next to --out)")

    p_report = sub.add_parser("report", help="merge prior outputs into one document")
    p_report.add_argument("inputs", nargs="+", help="JSON documents to merge")
    p_report.add_argument("--out", help="output JSON path")
    return parser


def run_command(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0

    try:
        return _dispatch(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CycleShiftError as exc:
        diagnostics = _document(
            "failure",
            {"tool": "cycleshift", "version": __version__, "schema": SCHEMA,
             "backend": backend_name()},
            {"error": type(exc).__name__, "message": str(exc)},
        )
        out = getattr(args, "out", None)
        if out:
            dump_json(diagnostics, out)
        print(f"computational failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "report":
        documents = []
        manifest = []
        for item in args.inputs:
            path = Path(item)
            if not path.exists():
                raise ConfigError(f"config field 'inputs': no such file {item!r}")
            doc = load_json(path)
            if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
                raise ConfigError(
                    f"config field 'inputs': {item!r} is not a {SCHEMA} document"
                )
            documents.append(doc)
            manifest.append({"path": str(path), "kind": doc.get("kind", "unknown")})
        merged = _document(
            "report",
            {"tool": "cycleshift", "version": __version__, "schema": SCHEMA,
             "backend": backend_name(), "manifest": manifest},
            {"documents": documents},
        )
        out = args.out or "report.json"
        dump_json(merged, out)
        print(out)
        return 0

    resolved = _resolve_from_args(args)

    if args.command == "floquet":
        payload = _floquet_payload(resolved, args.grid)
        out = args.out or f"{resolved.spec.name}-floquet.json"
        dump_json(_document("floquet", _metadata(resolved), payload), out)
        print(out)
        return 0

    if args.command == "analyze":
        if not (0.0 < args.eps <= 1.0):
            raise ConfigError(f"config field 'eps': must lie in (0, 1], got {args.eps}")
        payload = _analyze_payload(
            resolved, args.eps, args.mode, args.r0, args.grid_m, args.use_oracle
        )
        out = Path(args.out or f"{resolved.spec.name}-analyze.json")
        dump_json(_document("analyze", _metadata(resolved, args.mode), payload), out)
        csv_path = out.with_suffix(".csv")
        n = resolved.problem.dimension
        cols = (["t"] + [f"x0_{i+1}" for i in range(n)]
                + [f"xeps_{i+1}" for i in range(n)] + ["dev_shifted", "dev_unshifted"])
        rows = []
        delta = payload["shift"]["delta"]
        for k, t in enumerate(payload["deviation"]["t"]):
            x0 = resolved.cycle.state(t)
            xe = payload["trajectory_samples"][k]
            rows.append([t, *x0, *xe, payload["deviation"]["shifted"][k],
                         payload["deviation"]["unshifted"][k]])
        dump_csv(csv_path, cols, rows, comments=[
            "cycleshift analyze output",
            f"problem: {resolved.spec.name}",
            f"eps: {args.eps!r}  delta: {delta!r}",
        ])
        print(out)
        print(csv_path)
        return 0

    if args.command == "sweep":
        try:
            grid = tuple(float(tok) for tok in args.eps.split(",") if tok.strip())
        except ValueError as exc:
            raise ConfigError(f"config field 'eps': not a float list ({exc})") from exc
        try:
            config = analysis.SweepConfig(
                eps_grid=grid, mode=args.mode, r0=args.r0, grid_size=args.grid_m,
                use_solution_oracle=args.use_oracle and resolved.problem.solution_oracle is not None,
                use_shift_oracle=args.use_oracle and resolved.problem.shift_oracle is not None,
            )
        except DomainError as exc:
            raise ConfigError(f"config field 'eps': {exc}") from exc
        payload, rows = _sweep_payload(resolved, config)
        out = Path(args.out or f"{resolved.spec.name}-sweep.json")
        dump_json(_document("sweep", _metadata(resolved, args.mode), payload), out)
        csv_path = Path(args.csv) if args.csv else out.with_suffix(".csv")
        dump_csv(
            csv_path, CSV_COLUMNS, rows,
            comments=[
                "cycleshift sweep output",
                f"problem: {resolved.spec.name}",
                f"mode: {config.mode}",
            ],
        )
        failures = [r for r in payload["records"] if r["error"] is not None]
        print(out)
        print(csv_path)
        return 1 if failures and len(failures) == len(payload["records"]) else 0

    raise ConfigError(f"config field 'command': unknown {args.command!r}")


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
