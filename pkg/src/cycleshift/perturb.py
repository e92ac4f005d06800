"""Forced periodic solutions, transversal surfaces, shifts, bifurcation functions.

The shift machinery anchors a transversal (n-1)-surface at a cycle point and
solves x_eps(Delta) = S(v) in a box around (0, 0).  Two surface modes exist:

* "flowed"  - S(v) = Omega(T, 0, x0(0) + A v), the construction whose
  transversality follows from nondegeneracy.  Its reachable transversal
  extent is shrunk by the contracting multipliers, so for strongly stable
  cycles the box contains a crossing only at impractically small eps.
* "section" - S(v) = x0(0) + A v.  Any transversal anchor yields a valid
  shift family with the same O(eps) deviation bound, so this is the default
  for diagnostics.

Bifurcation functions: for a non-periodic adjoint eigenfunction z with
multiplier rho, the windowed integral

    Mperp_z(t) = rho/(rho-1) * integral_{t-T}^{t} <z(s), g(s, x0(s), 0)> ds

is the first-order offset of x_eps(t + Delta_eps) - x0(t) along z(t); the
Malkin function M_z0(t) integrates the periodic eigenfunction against the
phase-shifted forcing and controls which phases persist.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.linalg import null_space

from .cycle import LimitCycle
from .errors import (
    DegenerateCrossingError,
    DegenerateMultiplierError,
    DomainError,
    ExistenceNotEstablishedError,
    InvalidSurfaceMatrixError,
    NoPeriodicFirstVariationError,
    ShiftNotFoundError,
    TransversalityFailureError,
)
from .floquet import FloquetBasis, FloquetEntry, floquet_basis
from .ode import VectorField, flow_with_sensitivity, integrate
from .ode.fields import fd_jacobian

DEGENERATE_MULTIPLIER_TOL = 1e-6
QUAD_ABS_TOL = 1e-11
TRANSVERSALITY_THRESHOLD = 1e-8


# ---------------------------------------------------------------------------
# problem and solution containers

@dataclass(frozen=True)
class PerturbedProblem:
    """Base field plus T-periodic forcing x' = f(x) + eps g(t, x, eps)."""

    name: str
    base_field: VectorField
    g: Callable[[float, np.ndarray, float], np.ndarray]
    period: float
    g_jacobian: Optional[Callable[[float, np.ndarray, float], np.ndarray]] = None
    solution_oracle: Optional[Callable[[float, float], np.ndarray]] = None
    shift_oracle: Optional[Callable[[float], float]] = None

    @property
    def dimension(self) -> int:
        return self.base_field.dimension

    def g_at(self, t: float, x: np.ndarray, eps: float) -> np.ndarray:
        return np.asarray(self.g(t, x, eps), dtype=float)

    def combined_field(self, eps: float) -> VectorField:
        f = self.base_field

        def rhs(t, x):
            return np.asarray(f.rhs(t, x), dtype=float) + eps * np.asarray(
                self.g(t, x, eps), dtype=float
            )

        if f.jacobian is not None and self.g_jacobian is not None:
            def jac(t, x):
                return f.jacobian(t, x) + eps * self.g_jacobian(t, x, eps)
        elif f.jacobian is not None:
            def jac(t, x):
                return f.jacobian(t, x) + eps * fd_jacobian(
                    lambda tt, xx: self.g(tt, xx, eps), t, x
                )
        else:
            jac = None
        return VectorField(dimension=f.dimension, rhs=rhs, jacobian=jac, autonomous=False)

    def g_periodicity_defect(self, n_samples: int = 8, eps_values=(0.0, 0.3, 1.0)) -> float:
        """max |g(t+T) - g(t)| over a deterministic sample of (t, x, eps)."""
        rng = np.random.default_rng(20240801)
        worst = 0.0
        for _ in range(n_samples):
            t = float(rng.uniform(0.0, self.period))
            x = rng.standard_normal(self.dimension)
            for eps in eps_values:
                d = np.linalg.norm(
                    self.g_at(t + self.period, x, eps) - self.g_at(t, x, eps)
                )
                worst = max(worst, float(d))
        return worst


class PeriodicSolution:
    """A T-periodic solution of the forced system, densely evaluable."""

    def __init__(self, problem: PerturbedProblem, eps: float, orbit,
                 residual: float, iterations: int = 0, source: str = "shooting",
                 warnings: tuple[str, ...] = (), oracle_defect: float | None = None):
        self.problem = problem
        self.eps = float(eps)
        self.orbit = orbit
        self.residual = float(residual)
        self.iterations = iterations
        self.source = source
        self.warnings = warnings
        self.oracle_defect = oracle_defect

    @property
    def period(self) -> float:
        return self.problem.period

    def wrap(self, t):
        t = np.asarray(t, dtype=float)
        return t - np.floor(t / self.period) * self.period

    def eval(self, t):
        """x_eps(t) with periodic extension."""
        if self.source == "oracle":
            t_arr = np.asarray(t, dtype=float)
            if t_arr.ndim == 0:
                return self.problem.solution_oracle(float(t_arr), self.eps)
            return np.array([self.problem.solution_oracle(ti, self.eps) for ti in t_arr])
        return self.orbit.eval(self.wrap(t))

    def velocity(self, t: float) -> np.ndarray:
        x = self.eval(t)
        return self.problem.base_field(t, x) + self.eps * self.problem.g_at(t, x, self.eps)

    @classmethod
    def from_oracle(cls, problem: PerturbedProblem, eps: float) -> "PeriodicSolution":
        if problem.solution_oracle is None:
            raise DomainError(f"problem {problem.name!r} has no closed-form solution")
        return cls(problem, eps, orbit=None, residual=0.0, source="oracle")

    @classmethod
    def from_cycle(cls, problem: PerturbedProblem, cycle: LimitCycle) -> "PeriodicSolution":
        """The eps = 0 limit: the unperturbed cycle viewed as a solution."""
        sol = cls(problem, 0.0, orbit=cycle.orbit, residual=cycle.closure_defect)
        sol._cycle = cycle
        return sol


@dataclass(frozen=True)
class PeriodicSolveOptions:
    newton_tol: float = 1e-9
    max_iter: int = 40
    integrator_tol: float = 1e-11
    orbit_tol: float = 1e-11
    condition_warning: float = 1e7


def find_periodic_solution(problem: PerturbedProblem, eps: float, cycle: LimitCycle,
                           warm_start=None,
                           opts: PeriodicSolveOptions | None = None) -> PeriodicSolution:
    """Newton shooting for the T-periodic solution of the forced system.

    The initial guess is warm_start if given, else the cycle anchor.  The
    shooting Jacobian (M_eps - I) loses conditioning like 1/eps as the unit
    multiplier of the unforced limit is approached; beyond the configured cap
    a warning string is attached to the returned solution.
    """
    if not (0.0 < eps <= 1.0):
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    opts = opts or PeriodicSolveOptions()
    T = problem.period
    field_eps = problem.combined_field(eps)
    xi = np.asarray(warm_start if warm_start is not None else cycle.anchor, dtype=float).copy()
    n = problem.dimension
    warnings: list[str] = []

    def shoot(xi):
        res = flow_with_sensitivity(field_eps, T, 0.0, xi, opts.integrator_tol)
        return res.state - xi, res

    r, res = shoot(xi)
    rnorm = float(np.linalg.norm(r))
    it = 0
    while rnorm > opts.newton_tol and it < opts.max_iter:
        jac = res.sensitivity - np.eye(n)
        cond = float(np.linalg.cond(jac))
        if cond > opts.condition_warning and not warnings:
            warnings.append(
                f"shooting Jacobian condition number {cond:.3e} exceeds "
                f"{opts.condition_warning:.1e}; expected to grow like 1/eps"
            )
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise ExistenceNotEstablishedError(
                f"singular shooting Jacobian at eps={eps}: {exc}"
            ) from exc
        lam = 1.0
        accepted = False
        for _ in range(15):
            xi_try = xi + lam * step
            r_try, res_try = shoot(xi_try)
            r_try_norm = float(np.linalg.norm(r_try))
            if r_try_norm < rnorm * (1.0 - 0.25 * lam) or r_try_norm <= opts.newton_tol:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise ExistenceNotEstablishedError(
                f"Newton stalled at eps={eps}: residual {rnorm:.3e} after {it} iterations "
                "(the existence hypothesis may fail at this eps)"
            )
        xi, r, res, rnorm = xi_try, r_try, res_try, r_try_norm
        it += 1

    if rnorm > opts.newton_tol:
        raise ExistenceNotEstablishedError(
            f"no T-periodic solution found at eps={eps}: residual {rnorm:.3e} "
            f"after {it} iterations"
        )

    orbit = integrate(field_eps, (0.0, T), xi, opts.orbit_tol)
    oracle_defect = None
    if problem.solution_oracle is not None:
        grid = np.linspace(0.0, T, 65)
        defect = max(
            float(np.linalg.norm(orbit.eval(t) - problem.solution_oracle(t, eps)))
            for t in grid
        )
        oracle_defect = defect
    return PeriodicSolution(
        problem, eps, orbit, rnorm, iterations=it,
        warnings=tuple(warnings), oracle_defect=oracle_defect,
    )


# ---------------------------------------------------------------------------
# transversal surfaces and the shift equation

@dataclass(frozen=True)
class ShiftSolveOptions:
    tol: float = 1e-11
    max_iter: int = 50


class Surface:
    """Transversal surface S(v) anchored at x0(tau); see module docstring."""

    def __init__(self, cycle: LimitCycle, A: np.ndarray, mode: str, tau: float,
                 tangent: np.ndarray, margin: float, tol: float):
        self.cycle = cycle
        self.A = A
        self.mode = mode
        self.tau = float(tau)
        self.anchor = cycle.state(tau)
        self.tangent = tangent      # S'(0)
        self.margin = float(margin)
        self.tol = tol

    def h(self, v) -> np.ndarray:
        return self.anchor + self.A @ np.atleast_1d(np.asarray(v, dtype=float))

    def S(self, v) -> np.ndarray:
        base = self.h(v)
        if self.mode == "section":
            return base
        res = flow_with_sensitivity(self.cycle.field, self.cycle.period, 0.0, base, self.tol)
        return res.state

    def S_jacobian(self, v) -> np.ndarray:
        if self.mode == "section":
            return self.A
        base = self.h(v)
        res = flow_with_sensitivity(self.cycle.field, self.cycle.period, 0.0, base, self.tol)
        return res.sensitivity @ self.A


def _orthonormal_complement(vector: np.ndarray) -> np.ndarray:
    comp = null_space(vector[None, :])
    # pin the sign of each column for determinism
    for j in range(comp.shape[1]):
        col = comp[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            comp[:, j] = -col
    return comp


def build_surface(cycle: LimitCycle, A=None, mode: str = "section", tau: float = 0.0,
                  threshold: float = TRANSVERSALITY_THRESHOLD,
                  tol: float = 1e-11) -> Surface:
    """Construct the surface and certify its transversality margin.

    The margin is the smallest singular value of the column-normalized square
    matrix (x0'(tau), S'(0)); with a nondegenerate cycle it can only fall
    below threshold if the numerics contradict nondegeneracy.
    """
    if mode not in ("section", "flowed"):
        raise DomainError(f"surface mode must be 'section' or 'flowed', got {mode!r}")
    vel = cycle.velocity(tau)
    n = cycle.field.dimension
    if A is None:
        A = _orthonormal_complement(vel)
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.shape != (n, n - 1):
        raise InvalidSurfaceMatrixError(
            f"A has shape {A.shape}, expected ({n}, {n - 1})"
        )
    square = np.column_stack([vel, A])
    norms = np.linalg.norm(square, axis=0)
    if np.any(norms == 0.0) or np.linalg.svd(square / norms, compute_uv=False)[-1] < 1e-12:
        raise InvalidSurfaceMatrixError("(x0'(tau), A) is numerically singular")

    if mode == "section":
        tangent = A.copy()
    else:
        anchor = cycle.state(tau)
        mono = flow_with_sensitivity(cycle.field, cycle.period, 0.0, anchor, tol).sensitivity
        tangent = mono @ A

    square_t = np.column_stack([vel, tangent])
    tnorms = np.linalg.norm(square_t, axis=0)
    if np.any(tnorms == 0.0):
        raise TransversalityFailureError("surface tangent degenerated to zero", 0.0)
    margin = float(np.linalg.svd(square_t / tnorms, compute_uv=False)[-1])
    if margin <= threshold:
        raise TransversalityFailureError(
            "transversality margin below threshold; numerics contradict "
            "nondegeneracy", margin
        )
    return Surface(cycle, A, mode, tau, tangent, margin, tol)


@dataclass(frozen=True)
class ShiftSolution:
    delta: float
    v: np.ndarray
    residual: float
    eps: float
    mode: str
    iterations: int
    tau: float = 0.0
    r0: float = np.nan


def shift_box_radius(cycle: LimitCycle, grid_size: int = 64) -> float:
    """Default box half-width: half the smaller of T/4 and a tube-radius estimate.

    The tube radius is estimated as half the minimal distance between orbit
    points at least a quarter period apart in phase.
    """
    T = cycle.period
    ts = np.linspace(0.0, T, grid_size, endpoint=False)
    pts = cycle.orbit.eval(ts)
    min_dist = np.inf
    for i in range(grid_size):
        for j in range(i + 1, grid_size):
            sep = abs(ts[i] - ts[j])
            sep = min(sep, T - sep)
            if sep >= T / 4.0:
                min_dist = min(min_dist, float(np.linalg.norm(pts[i] - pts[j])))
    tube = 0.5 * min_dist if np.isfinite(min_dist) else T / 4.0
    return 0.5 * min(T / 4.0, tube)


def solve_shift(x_eps: PeriodicSolution, surface: Surface, r0: float | None = None,
                opts: ShiftSolveOptions | None = None) -> ShiftSolution:
    """Solve x_eps(tau + Delta) = S(v) by damped Newton from (0, 0).

    The iterate is confined to the box [-r0, r0] x {|v| <= r0}; leaving it, or
    stalling, raises ShiftNotFoundError with the best residual seen.  In
    flowed mode on a strongly contracting cycle this failure is expected at
    desk eps: the reachable transversal extent of S shrinks with the
    contracting multipliers (see module docstring).
    """
    opts = opts or ShiftSolveOptions()
    if r0 is None:
        r0 = shift_box_radius(surface.cycle)
    if r0 <= 0:
        raise DomainError(f"r0 must be positive, got {r0}")
    tau = surface.tau
    n = surface.cycle.field.dimension

    delta = 0.0
    v = np.zeros(n - 1)

    def residual(delta, v):
        return x_eps.eval(tau + delta) - surface.S(v)

    r = residual(delta, v)
    rnorm = float(np.linalg.norm(r))
    best = rnorm
    it = 0
    while rnorm > opts.tol:
        if it >= opts.max_iter:
            raise ShiftNotFoundError(
                f"no crossing found within {opts.max_iter} iterations", best
            )
        jac = np.column_stack([x_eps.velocity(tau + delta), -surface.S_jacobian(v)])
        try:
            if np.linalg.cond(jac) > 1e14:
                raise DegenerateCrossingError(
                    f"shift Jacobian numerically singular at Delta={delta:.3e}"
                )
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise DegenerateCrossingError(f"shift Jacobian singular: {exc}") from exc

        lam = 1.0
        accepted = False
        for _ in range(20):
            d_try = delta + lam * step[0]
            v_try = v + lam * step[1:]
            if abs(d_try) > r0 or np.linalg.norm(v_try) > r0:
                lam *= 0.5
                continue
            r_try = residual(d_try, v_try)
            r_try_norm = float(np.linalg.norm(r_try))
            if r_try_norm < rnorm * (1.0 - 0.25 * lam) or r_try_norm <= opts.tol:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise ShiftNotFoundError(
                "Newton left the box or stalled; no crossing inside "
                f"[-{r0:.3g}, {r0:.3g}]", best
            )
        delta, v, r, rnorm = d_try, v_try, r_try, r_try_norm
        best = min(best, rnorm)
        it += 1

    return ShiftSolution(
        delta=float(delta), v=v.copy(), residual=rnorm, eps=x_eps.eps,
        mode=surface.mode, iterations=it, tau=tau, r0=float(r0),
    )


def shift_for_phase(x_eps: PeriodicSolution, cycle: LimitCycle, tau: float,
                    mode: str = "section", r0: float | None = None,
                    opts: ShiftSolveOptions | None = None,
                    A=None) -> ShiftSolution:
    """Shift against the surface anchored at x0(tau): solves x_eps(tau+Delta) in S^tau."""
    if not (0.0 <= tau <= cycle.period):
        raise DomainError(f"tau must lie in [0, T], got {tau}")
    surface = build_surface(cycle, A=A, mode=mode, tau=tau)
    return solve_shift(x_eps, surface, r0=r0, opts=opts)


@dataclass(frozen=True)
class DeviationProfile:
    ts: np.ndarray
    values: np.ndarray
    sup: float
    sup_over_eps: float | None
    eps: float
    delta: float


def shifted_deviation(x_eps: PeriodicSolution, cycle: LimitCycle, delta: float,
                      grid_size: int = 64) -> DeviationProfile:
    """Profile t -> |x_eps(t + delta) - x0(t)| on a uniform grid over [0, T]."""
    if grid_size < 16:
        raise DomainError(f"grid size must be >= 16, got {grid_size}")
    T = cycle.period
    ts = np.linspace(0.0, T, grid_size, endpoint=False)
    xe = x_eps.eval(ts + delta)
    x0 = cycle.state(ts)
    ds = np.linalg.norm(xe - x0, axis=1)
    sup = float(np.max(ds))
    return DeviationProfile(
        ts=ts, values=ds, sup=sup,
        sup_over_eps=(sup / x_eps.eps if x_eps.eps > 0 else None),
        eps=x_eps.eps, delta=float(delta),
    )


# ---------------------------------------------------------------------------
# bifurcation functions

@dataclass(frozen=True)
class BifValue:
    t: float
    value: float
    which: str                      # "mperp" or "malkin"
    entry_id: str | None = None
    multiplier: float | None = None


def _forcing_pairing(entry: FloquetEntry, cycle: LimitCycle, problem: PerturbedProblem):
    def phi(s: float) -> float:
        return float(entry.eval(s) @ problem.g_at(s, cycle.state(s), 0.0))
    return phi


def _quad_piecewise(func, a: float, b: float, breaks) -> float:
    """Adaptive quadrature on [a, b], split at interior breakpoints."""
    pts = [a] + [p for p in sorted(breaks) if a < p < b] + [b]
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, _ = quad(func, lo, hi, epsabs=QUAD_ABS_TOL, epsrel=1e-11, limit=200)
        total += val
    return total


def mperp(entry: FloquetEntry, cycle: LimitCycle, problem: PerturbedProblem,
          t: float) -> float:
    """Mperp_z(t) = rho/(rho-1) * integral_{t-T}^{t} <z(s), g(s, x0(s), 0)> ds.

    z is extended below [0, T] through the Floquet relation; the quadrature
    is split at the period boundaries where the numerical extension is only
    C^0.
    """
    if entry.periodic or abs(entry.multiplier - 1.0) <= DEGENERATE_MULTIPLIER_TOL:
        raise DegenerateMultiplierError(
            f"multiplier {entry.multiplier} too close to 1: the rho/(rho-1) "
            "prefactor is singular"
        )
    T = cycle.period
    phi = _forcing_pairing(entry, cycle, problem)
    k_lo = int(np.floor((t - T) / T))
    k_hi = int(np.ceil(t / T)) + 1
    breaks = [k * T for k in range(k_lo, k_hi + 1)]
    total = _quad_piecewise(phi, t - T, t, breaks)
    rho = entry.multiplier
    return rho / (rho - 1.0) * total


def mperp_grid(entry: FloquetEntry, cycle: LimitCycle, problem: PerturbedProblem,
               ts) -> list[BifValue]:
    """Mperp on a grid via its exact derivative (Mperp_z)'(t) = <z(t), g(t, x0(t), 0)>."""
    ts = np.asarray(ts, dtype=float)
    phi = _forcing_pairing(entry, cycle, problem)
    base = mperp(entry, cycle, problem, float(ts[0]))
    values = [base]
    T = cycle.period
    for lo, hi in zip(ts[:-1], ts[1:]):
        k_lo, k_hi = int(np.floor(lo / T)), int(np.ceil(hi / T)) + 1
        breaks = [k * T for k in range(k_lo, k_hi + 1)]
        values.append(values[-1] + _quad_piecewise(phi, float(lo), float(hi), breaks))
    return [
        BifValue(t=float(t), value=float(val), which="mperp",
                 entry_id=entry.entry_id, multiplier=entry.multiplier)
        for t, val in zip(ts, values)
    ]


def malkin(z0: FloquetEntry, cycle: LimitCycle, problem: PerturbedProblem,
           t: float) -> float:
    """Malkin bifurcation function integral_0^T <z0(s), g(s - t, x0(s), 0)> ds."""
    if not z0.periodic:
        raise DomainError("the Malkin function takes the T-periodic eigenfunction")
    T = cycle.period

    def integrand(s: float) -> float:
        return float(z0.eval(s) @ problem.g_at(s - t, cycle.state(s), 0.0))

    return _quad_piecewise(integrand, 0.0, T, [T])


def malkin_grid(z0: FloquetEntry, cycle: LimitCycle, problem: PerturbedProblem,
                ts) -> list[BifValue]:
    return [
        BifValue(t=float(t), value=malkin(z0, cycle, problem, float(t)), which="malkin",
                 entry_id=z0.entry_id, multiplier=1.0)
        for t in np.asarray(ts, dtype=float)
    ]


def scalar_projection(x_eps: PeriodicSolution, delta: float, entry: FloquetEntry,
                      cycle: LimitCycle, t: float) -> float:
    """<z(t), x_eps(t + delta) - x0(t)> / eps, the quantity Mperp approximates."""
    if x_eps.eps <= 0.0:
        raise DomainError("scalar projection requires eps > 0")
    diff = x_eps.eval(t + delta) - cycle.state(t)
    return float(entry.eval(t) @ diff) / x_eps.eps


# ---------------------------------------------------------------------------
# first variation

class FirstVariation:
    """T-periodic solution of y' = f'(x0(t)) y + g(t, x0(t), 0)."""

    def __init__(self, trajectory, period: float, residual: float, pinning: str):
        self.trajectory = trajectory
        self.period = period
        self.residual = residual
        self.pinning = pinning

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        wrapped = t - np.floor(t / self.period) * self.period
        return self.trajectory.eval(wrapped)


def first_variation(cycle: LimitCycle, problem: PerturbedProblem,
                    basis: FloquetBasis | None = None,
                    solvability_tol: float = 1e-7,
                    tol: float = 1e-12) -> FirstVariation:
    """Solve the linear periodic problem for the first variation y0.

    Solvability requires the Malkin function to vanish at 0 (Fredholm
    alternative); the free component of y0 along the cycle velocity is pinned
    to zero at t = 0.
    """
    basis = basis or floquet_basis(cycle)
    m0 = malkin(basis.periodic_entry, cycle, problem, 0.0)
    if abs(m0) > solvability_tol:
        raise NoPeriodicFirstVariationError(
            "no T-periodic first variation: the Malkin function does not vanish "
            "at 0 (use the shifted-comparison path instead)", m0
        )

    n = cycle.field.dimension
    T = cycle.period
    f = cycle.field

    def inhom_rhs(t, u):
        x0 = cycle.state(t)
        jac = f.jacobian_at(0.0, x0)
        y = u[:n]
        Y = u[n:].reshape(n, n)
        out = np.empty(n + n * n)
        out[:n] = jac @ y + problem.g_at(t, x0, 0.0)
        out[n:] = (jac @ Y).reshape(-1)
        return out

    aug_field = VectorField(dimension=n + n * n, rhs=inhom_rhs, autonomous=False)
    u0 = np.concatenate([np.zeros(n), np.eye(n).reshape(-1)])
    aug = integrate(aug_field, (0.0, T), u0, tol)
    uT = aug.endpoint()
    p_T = uT[:n]
    Y_T = uT[n:].reshape(n, n)

    vel0 = cycle.velocity(0.0)
    bordered = np.zeros((n + 1, n + 1))
    bordered[:n, :n] = Y_T - np.eye(n)
    bordered[:n, n] = vel0
    bordered[n, :n] = vel0

    y0 = np.zeros(n)
    lin_field = VectorField(
        dimension=n,
        rhs=lambda t, y: f.jacobian_at(0.0, cycle.state(t)) @ y + problem.g_at(t, cycle.state(t), 0.0),
        autonomous=False,
    )
    traj = None
    residual = np.inf
    for _ in range(3):
        endpoint = Y_T @ y0 + p_T if traj is None else traj.endpoint()
        gap = endpoint - y0
        if np.linalg.norm(gap) <= 1e-12:
            break
        rhs_vec = np.concatenate([-gap, [0.0]])
        correction = np.linalg.solve(bordered, rhs_vec)
        y0 = y0 + correction[:n]
        traj = integrate(lin_field, (0.0, T), y0, tol)
        residual = float(np.linalg.norm(traj.endpoint() - y0))
        if residual <= 1e-10 * max(1.0, np.linalg.norm(y0)):
            break
    if traj is None:
        traj = integrate(lin_field, (0.0, T), y0, tol)
        residual = float(np.linalg.norm(traj.endpoint() - y0))
    if residual > 1e-8 * max(1.0, float(np.linalg.norm(y0))):
        raise NoPeriodicFirstVariationError(
            f"periodic closure not achieved (residual {residual:.3e}); "
            "solvability is marginal", m0
        )
    return FirstVariation(
        traj, T, residual,
        pinning="component of y0(0) along x0'(0) set to zero",
    )
