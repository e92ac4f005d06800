"""Epsilon sweeps, empirical convergence orders, and corollary verdicts.

Everything here is deterministic: fixed grids, fixed iteration caps, no
randomness, so identical inputs produce bit-identical reports.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .cycle import LimitCycle
from .errors import ConfigError, CycleShiftError, DomainError, InvalidDataError
from .floquet import FloquetBasis
from .perturb import (
    PerturbedProblem,
    PeriodicSolution,
    ShiftSolution,
    Surface,
    build_surface,
    find_periodic_solution,
    mperp_grid,
    shift_box_radius,
    shifted_deviation,
    solve_shift,
)

SIGN_THRESHOLD_RATIO = 1e-6   # skip grid points with |Mperp| below this times max
_ZERO_LEVEL = 1e-9            # below this a bifurcation value counts as zero


def worker_count() -> int:
    """Pool size for independent per-eps work, capped by CYCLESHIFT_THREADS."""
    raw = os.environ.get("CYCLESHIFT_THREADS", "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"CYCLESHIFT_THREADS must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"CYCLESHIFT_THREADS must be >= 1, got {value}")
    return value


@dataclass(frozen=True)
class SweepConfig:
    eps_grid: tuple[float, ...]
    mode: str = "section"
    r0: float | None = None
    grid_size: int = 64
    eigenfunctions: str | tuple[str, ...] = "all"   # non-periodic entry selection
    use_solution_oracle: bool = False
    use_shift_oracle: bool = False

    def __post_init__(self):
        grid = tuple(float(e) for e in self.eps_grid)
        if not grid:
            raise DomainError("eps grid must be non-empty")
        if any(not (0.0 < e <= 1.0) for e in grid):
            raise DomainError(f"all eps must lie in (0, 1], got {grid}")
        if any(a <= b for a, b in zip(grid, grid[1:])):
            raise DomainError(f"eps grid must be strictly decreasing, got {grid}")
        object.__setattr__(self, "eps_grid", grid)
        if self.mode not in ("section", "flowed"):
            raise DomainError(f"mode must be 'section' or 'flowed', got {self.mode!r}")
        if self.grid_size < 16:
            raise DomainError(f"grid size must be >= 16, got {self.grid_size}")


@dataclass(frozen=True)
class OrderFit:
    p: float
    c: float
    fit_residual: float
    n_points: int


@dataclass(frozen=True)
class SweepRecord:
    eps: float
    delta: float | None
    v_norm: float | None
    sup_shifted: float | None
    sup_unshifted: float | None
    residual_solution: float | None
    residual_shift: float | None
    solution_iterations: int | None
    shift_iterations: int | None
    warnings: tuple[str, ...] = ()
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class ConvergenceReport:
    records: tuple[SweepRecord, ...]
    shifted_fit: OrderFit | None
    unshifted_fit: OrderFit | None
    bound_constant: float | None      # max over the grid of sup_shifted / eps
    fitted: bool
    mode: str
    r0: float
    grid_size: int
    workers: int


def fit_order(points) -> OrderFit:
    """Least-squares fit of log d = p log eps + log c."""
    pts = [(float(e), float(d)) for e, d in points]
    if len(pts) < 2:
        raise InvalidDataError(f"order fit needs >= 2 points, got {len(pts)}")
    if any(e <= 0 or d <= 0 for e, d in pts):
        raise InvalidDataError("order fit needs strictly positive (eps, d) pairs")
    log_e = np.log([e for e, _ in pts])
    log_d = np.log([d for _, d in pts])
    design = np.column_stack([log_e, np.ones_like(log_e)])
    coef, *_ = np.linalg.lstsq(design, log_d, rcond=None)
    resid = log_d - design @ coef
    return OrderFit(
        p=float(coef[0]),
        c=float(np.exp(coef[1])),
        fit_residual=float(np.sqrt(np.mean(resid**2))),
        n_points=len(pts),
    )


def _oracle_shift(problem: PerturbedProblem, x_eps: PeriodicSolution,
                  surface: Surface) -> ShiftSolution:
    """Package the problem's closed-form shift as a ShiftSolution."""
    delta = float(problem.shift_oracle(x_eps.eps))
    target = x_eps.eval(surface.tau + delta)
    v, *_ = np.linalg.lstsq(surface.A, target - surface.anchor, rcond=None)
    residual = float(np.linalg.norm(target - surface.S(v)))
    return ShiftSolution(
        delta=delta, v=v, residual=residual, eps=x_eps.eps,
        mode=f"oracle-{surface.mode}", iterations=0, tau=surface.tau,
    )


def _solve_case(problem: PerturbedProblem, cycle: LimitCycle, eps: float,
                surface: Surface, config: SweepConfig, r0: float,
                warm_start=None) -> tuple[PeriodicSolution, ShiftSolution]:
    if config.use_solution_oracle:
        x_eps = PeriodicSolution.from_oracle(problem, eps)
    else:
        x_eps = find_periodic_solution(problem, eps, cycle, warm_start=warm_start)
    if config.use_shift_oracle and problem.shift_oracle is not None:
        shift = _oracle_shift(problem, x_eps, surface)
    else:
        shift = solve_shift(x_eps, surface, r0=r0)
    return x_eps, shift


def sweep(problem: PerturbedProblem, cycle: LimitCycle,
          config: SweepConfig) -> ConvergenceReport:
    """Run the eps grid: solve, shift, profile, then fit convergence orders.

    The grid is processed from largest to smallest eps so each shooting solve
    can warm-start from the previous solution (the shooting Jacobian
    conditioning degrades like 1/eps).  Per-eps failures are recorded in the
    report without aborting the remaining grid.  Independent eps points are
    processed by a thread pool only on the oracle path, where no warm-start
    chain exists.
    """
    surface = build_surface(cycle, mode=config.mode)
    r0 = config.r0 if config.r0 is not None else shift_box_radius(cycle)
    workers = worker_count()

    def run_case(eps: float, warm_start) -> tuple[SweepRecord, PeriodicSolution | None]:
        try:
            x_eps, shift = _solve_case(problem, cycle, eps, surface, config, r0, warm_start)
            shifted = shifted_deviation(x_eps, cycle, shift.delta, config.grid_size)
            unshifted = shifted_deviation(x_eps, cycle, 0.0, config.grid_size)
            record = SweepRecord(
                eps=eps,
                delta=shift.delta,
                v_norm=float(np.linalg.norm(shift.v)),
                sup_shifted=shifted.sup,
                sup_unshifted=unshifted.sup,
                residual_solution=x_eps.residual,
                residual_shift=shift.residual,
                solution_iterations=x_eps.iterations,
                shift_iterations=shift.iterations,
                warnings=tuple(x_eps.warnings),
            )
            return record, x_eps
        except CycleShiftError as exc:
            return SweepRecord(
                eps=eps, delta=None, v_norm=None, sup_shifted=None,
                sup_unshifted=None, residual_solution=None, residual_shift=None,
                solution_iterations=None, shift_iterations=None,
                error=f"{type(exc).__name__}: {exc}",
            ), None

    records: list[SweepRecord] = []
    if config.use_solution_oracle and workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(config.eps_grid))) as pool:
            results = list(pool.map(lambda e: run_case(e, None), config.eps_grid))
        records = [rec for rec, _ in results]
    else:
        warm = None
        for eps in config.eps_grid:
            record, x_eps = run_case(eps, warm)
            records.append(record)
            if x_eps is not None and x_eps.orbit is not None:
                warm = x_eps.eval(0.0)

    good = [r for r in records if r.ok]
    fitted = len(good) >= 2
    shifted_fit = fit_order([(r.eps, r.sup_shifted) for r in good]) if fitted else None
    unshifted_fit = fit_order([(r.eps, r.sup_unshifted) for r in good]) if fitted else None
    bound = max((r.sup_shifted / r.eps for r in good), default=None)
    return ConvergenceReport(
        records=tuple(records),
        shifted_fit=shifted_fit,
        unshifted_fit=unshifted_fit,
        bound_constant=bound,
        fitted=fitted,
        mode=config.mode,
        r0=float(r0),
        grid_size=config.grid_size,
        workers=workers,
    )


# ---------------------------------------------------------------------------
# corollary checks

@dataclass(frozen=True)
class CheckOutcome:
    check: str
    status: str            # "pass" | "fail" | "inapplicable" | "reported"
    details: dict
    annotations: tuple[str, ...] = ()


@dataclass(frozen=True)
class CorollaryReport:
    outcomes: tuple[CheckOutcome, ...]
    eps_list: tuple[float, ...]
    mode: str
    grid_size: int
    sign_threshold_ratio: float

    def outcome(self, check: str) -> CheckOutcome:
        for o in self.outcomes:
            if o.check == check:
                return o
        raise KeyError(check)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def _min_distance_to_point(x_eps: PeriodicSolution, point: np.ndarray,
                           coarse: int = 256) -> float:
    """min_t |x_eps(t) - point| over one period (grid plus local refinement)."""
    T = x_eps.period
    ts = np.linspace(0.0, T, coarse, endpoint=False)
    ds = np.linalg.norm(x_eps.eval(ts) - point, axis=1)
    k = int(np.argmin(ds))
    lo, hi = ts[k] - T / coarse, ts[k] + T / coarse
    res = minimize_scalar(
        lambda t: float(np.linalg.norm(x_eps.eval(t) - point)),
        bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12},
    )
    return float(min(res.fun, ds[k]))


def corollary_checks(problem: PerturbedProblem, cycle: LimitCycle,
                     basis: FloquetBasis, eps_list, config: SweepConfig,
                     grid_size: int = 32) -> CorollaryReport:
    """Evaluate the checkable consequences of the sign/size corollaries.

    Verdicts cite the inputs (eps, t, eigenfunction id) that produced them.
    cor5 formally requires the flowed-surface shifts; when run in section
    mode the check is still evaluated but annotated "mode-mismatch".
    """
    if not basis.nonperiodic_entries:
        outcomes = [
            CheckOutcome(c, "inapplicable", {"reason": "no non-periodic eigenfunction"})
            for c in ("cor3", "cor4", "cor5", "cor6", "cor7", "lemma3")
        ]
        return CorollaryReport(tuple(outcomes), tuple(eps_list), config.mode,
                               grid_size, SIGN_THRESHOLD_RATIO)

    eps_list = tuple(float(e) for e in eps_list)
    T = cycle.period
    ts = np.linspace(0.0, T, grid_size, endpoint=False)
    surface = build_surface(cycle, mode=config.mode)
    r0 = config.r0 if config.r0 is not None else shift_box_radius(cycle)

    entries = basis.nonperiodic_entries
    if config.eigenfunctions != "all":
        wanted = set(config.eigenfunctions)
        unknown = wanted - {e.entry_id for e in entries}
        if unknown:
            raise DomainError(
                f"unknown eigenfunction selection {sorted(unknown)}; available: "
                f"{[e.entry_id for e in entries]}"
            )
        entries = tuple(e for e in entries if e.entry_id in wanted)
    mperp_tables = {
        e.entry_id: np.array([bv.value for bv in mperp_grid(e, cycle, problem, ts)])
        for e in entries
    }
    mperp_at_zero = {e.entry_id: float(mperp_tables[e.entry_id][0]) for e in entries}
    scales = {eid: float(np.max(np.abs(tab))) for eid, tab in mperp_tables.items()}

    cases: dict[float, tuple[PeriodicSolution, ShiftSolution]] = {}
    case_errors: dict[float, str] = {}
    for eps in eps_list:
        try:
            cases[eps] = _solve_case(problem, cycle, eps, surface, config, r0)
        except CycleShiftError as exc:
            case_errors[eps] = f"{type(exc).__name__}: {exc}"

    outcomes: list[CheckOutcome] = []

    # cor3: sign of <z(t), x_eps(t+Delta) - x0(t)> matches sign of Mperp_z(t)
    cor3_failures: list[dict] = []
    cor3_checked = 0
    cor3_min_margin = np.inf
    for eps, (x_eps, shift) in cases.items():
        diff = x_eps.eval(ts + shift.delta) - cycle.state(ts)
        for e in entries:
            tab = mperp_tables[e.entry_id]
            keep = np.abs(tab) > max(SIGN_THRESHOLD_RATIO * scales[e.entry_id], _ZERO_LEVEL)
            z_vals = e.trajectory.eval(ts)
            for k in np.flatnonzero(keep):
                cos = _cosine(z_vals[k], diff[k])
                cor3_checked += 1
                cor3_min_margin = min(cor3_min_margin, abs(cos))
                if np.sign(cos) != np.sign(tab[k]):
                    cor3_failures.append({
                        "eps": eps, "t": float(ts[k]), "entry": e.entry_id,
                        "mperp": float(tab[k]), "cosine": cos,
                    })
    outcomes.append(CheckOutcome(
        "cor3",
        "pass" if cases and not cor3_failures else ("fail" if cor3_failures else "inapplicable"),
        {
            "checked_points": cor3_checked,
            "eps": list(cases),
            "entries": [e.entry_id for e in entries],
            "min_abs_cosine": None if not cor3_checked else float(cor3_min_margin),
            "failures": cor3_failures,
            "solver_errors": case_errors,
        },
    ))

    # cor4: two-sided eps bounds when some Mperp never vanishes on the grid
    cor4_entry = None
    for e in entries:
        tab = mperp_tables[e.entry_id]
        if np.min(np.abs(tab)) > max(SIGN_THRESHOLD_RATIO * scales[e.entry_id], _ZERO_LEVEL):
            cor4_entry = e.entry_id
            break
    if cor4_entry is None or not cases:
        outcomes.append(CheckOutcome("cor4", "inapplicable", {
            "reason": "no eigenfunction with Mperp bounded away from zero",
            "entries": [e.entry_id for e in entries],
        }))
    else:
        per_eps = {}
        ok = True
        for eps, (x_eps, shift) in cases.items():
            profile = shifted_deviation(x_eps, cycle, shift.delta, max(config.grid_size, grid_size))
            c1 = float(np.min(profile.values) / eps)
            c2 = float(np.max(profile.values) / eps)
            per_eps[eps] = {"c1": c1, "c2": c2}
            ok = ok and 0.0 < c1 <= c2
        outcomes.append(CheckOutcome(
            "cor4", "pass" if ok else "fail",
            {"witness_entry": cor4_entry, "per_eps": per_eps},
        ))

    # cor5: x_eps never visits the anchor when Mperp(0) != 0 for some entry
    cor5_witness = [
        eid for eid in mperp_at_zero
        if abs(mperp_at_zero[eid]) > max(SIGN_THRESHOLD_RATIO * scales[eid], _ZERO_LEVEL)
    ]
    annotations = () if config.mode == "flowed" else (
        "mode-mismatch: this consequence formally requires the flowed-surface shifts",
    )
    if not cor5_witness or not cases:
        outcomes.append(CheckOutcome("cor5", "inapplicable", {
            "reason": "Mperp(0) = 0 for all non-periodic eigenfunctions",
            "mperp_at_zero": mperp_at_zero,
        }))
    else:
        per_eps = {}
        ok = True
        for eps, (x_eps, _) in cases.items():
            margin = _min_distance_to_point(x_eps, cycle.anchor)
            per_eps[eps] = {"min_distance": margin}
            ok = ok and margin > 0.0
        outcomes.append(CheckOutcome(
            "cor5", "pass" if ok else "fail",
            {"witness_entries": cor5_witness, "mperp_at_zero": mperp_at_zero,
             "per_eps": per_eps},
            annotations=annotations,
        ))

    # anchor ratios feed cor6, cor7 and the lemma3 diagnostic
    anchor_ratios = {}
    anchor_cosines = {}
    for eps, (x_eps, shift) in cases.items():
        diff0 = x_eps.eval(shift.delta) - cycle.anchor
        anchor_ratios[eps] = float(np.linalg.norm(diff0) / eps)
        anchor_cosines[eps] = {
            e.entry_id: _cosine(e.initial(), diff0) for e in entries
        }

    # cor6: anchor ratio tends to zero when all Mperp(0) vanish
    all_zero = all(
        abs(mperp_at_zero[eid]) <= max(SIGN_THRESHOLD_RATIO * scales[eid], _ZERO_LEVEL)
        for eid in mperp_at_zero
    )
    if not all_zero or not cases:
        outcomes.append(CheckOutcome("cor6", "inapplicable", {
            "reason": "some Mperp(0) != 0", "mperp_at_zero": mperp_at_zero,
        }))
    else:
        ratios = [anchor_ratios[e] for e in eps_list if e in anchor_ratios]
        identically_zero = all(r <= _ZERO_LEVEL for r in ratios)
        decreasing = (
            len(ratios) >= 3
            and all(a > b for a, b in zip(ratios, ratios[1:]))
            and ratios[-1] <= 0.5 * ratios[0]
        )
        outcomes.append(CheckOutcome(
            "cor6", "pass" if (identically_zero or decreasing) else "fail",
            {"anchor_ratios": {e: anchor_ratios[e] for e in anchor_ratios},
             "criterion": "strict decrease over >= 3 eps and final <= half initial"},
        ))

    # cor7: dichotomy between a uniformly nonzero cosine and a vanishing ratio
    if not cases:
        outcomes.append(CheckOutcome("cor7", "inapplicable", {"reason": "no solved eps"}))
    else:
        branch = None
        witness = None
        for e in entries:
            if all(abs(anchor_cosines[eps][e.entry_id]) > 1e-6 for eps in cases):
                branch, witness = "nonzero-cosine", e.entry_id
                break
        if branch is None:
            ratios = [anchor_ratios[e] for e in eps_list if e in anchor_ratios]
            if ratios and (all(r <= _ZERO_LEVEL for r in ratios) or (
                len(ratios) >= 3 and all(a > b for a, b in zip(ratios, ratios[1:]))
            )):
                branch = "vanishing-ratio"
        outcomes.append(CheckOutcome(
            "cor7", "pass" if branch else "fail",
            {"branch": branch or "undetermined", "witness_entry": witness,
             "anchor_cosines": anchor_cosines},
        ))

    # lemma3: observed max |cos| between eigenfunctions and the anchor offset
    lemma3_seq = {}
    for eps, (x_eps, shift) in cases.items():
        diff0 = x_eps.eval(shift.delta) - cycle.anchor
        if np.linalg.norm(diff0) > _ZERO_LEVEL * max(1.0, float(np.linalg.norm(cycle.anchor))):
            lemma3_seq[eps] = max(abs(c) for c in anchor_cosines[eps].values())
    outcomes.append(CheckOutcome(
        "lemma3", "reported",
        {"max_abs_cosine": lemma3_seq,
         "note": "observed lower-bound sequence; the limiting constant is "
                 "non-constructive"},
    ))

    return CorollaryReport(
        outcomes=tuple(outcomes),
        eps_list=eps_list,
        mode=config.mode,
        grid_size=grid_size,
        sign_threshold_ratio=SIGN_THRESHOLD_RATIO,
    )
