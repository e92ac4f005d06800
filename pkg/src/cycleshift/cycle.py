"""Limit cycles of autonomous systems: location, monodromy, nondegeneracy.

The cycle is found by Newton shooting on the bordered system
    Omega(T, 0, xi) - xi = 0,   <f(x_guess), xi - x_guess> = 0,
whose phase row removes the time-translation null direction that would
otherwise make the monodromy-minus-identity block singular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import (
    AmbiguousClusterError,
    DegenerateOrbitError,
    DomainError,
    NoCycleFoundError,
    PeriodCollapseError,
)
from .ode import VectorField, flow_with_sensitivity, integrate
from .ode.integrate import DEFAULT_TOL

DEFAULT_CLUSTER_TOL = 1e-6
EQUILIBRIUM_THRESHOLD = 1e-8

# The dense orbit is the reference object every diagnostic compares against,
# so it is stored at a tighter tolerance than the working default.
ORBIT_TOL = 1e-12


@dataclass(frozen=True)
class CycleSolveOptions:
    tol: float = 1e-10             # Newton residual tolerance
    max_iter: int = 30
    min_period: float = 1e-3
    integrator_tol: float = 1e-12  # tolerance of the shooting flow evaluations
    orbit_tol: float = ORBIT_TOL   # tolerance of the stored dense orbit


class LimitCycle:
    """A periodic orbit with dense sampling of x0 and its velocity over [0, T]."""

    def __init__(self, field: VectorField, anchor: np.ndarray, period: float,
                 orbit, residual: float):
        self.field = field
        self.anchor = np.asarray(anchor, dtype=float)
        self.period = float(period)
        self.orbit = orbit
        self.residual = float(residual)
        self.closure_defect = float(np.linalg.norm(orbit.eval(period) - self.anchor))

    @classmethod
    def from_anchor(cls, field: VectorField, anchor, period: float,
                    orbit_tol: float = ORBIT_TOL, validate: bool = True) -> "LimitCycle":
        anchor = np.asarray(anchor, dtype=float)
        orbit = integrate(field, (0.0, period), anchor, orbit_tol)
        cyc = cls(field, anchor, period, orbit, residual=np.nan)
        if validate:
            if cyc.closure_defect > 1e3 * orbit_tol * max(1.0, np.linalg.norm(anchor)):
                raise DomainError(
                    f"orbit does not close: defect {cyc.closure_defect:.3e}"
                )
            if np.linalg.norm(cyc.velocity(0.0)) < EQUILIBRIUM_THRESHOLD:
                raise DegenerateOrbitError("anchor is an equilibrium of the field")
        return cyc

    def wrap(self, t) -> np.ndarray:
        """Reduce times into [0, T) for periodic evaluation."""
        t = np.asarray(t, dtype=float)
        return t - np.floor(t / self.period) * self.period

    def state(self, t):
        """x0(t), extended periodically outside [0, T]."""
        return self.orbit.eval(self.wrap(t))

    def velocity(self, t):
        """dx0/dt(t) = f(x0(t))."""
        x = self.state(t)
        if x.ndim == 1:
            return self.field(0.0, x)
        return np.array([self.field(0.0, row) for row in x])

    def rebased(self, tau: float) -> "LimitCycle":
        """Same cycle re-anchored at x0(tau)."""
        return LimitCycle.from_anchor(
            self.field, self.state(tau), self.period, self.orbit.tol, validate=False
        )

    def __repr__(self):
        return (f"LimitCycle(n={self.field.dimension}, T={self.period:.12g}, "
                f"anchor={np.array2string(self.anchor, precision=6)})")


@dataclass(frozen=True)
class Multiplier:
    value: complex
    multiplicity: int


@dataclass(frozen=True)
class MonodromyData:
    matrix: np.ndarray
    multipliers: tuple[Multiplier, ...]
    unit_multiplier_multiplicity: int
    cluster_tol: float


@dataclass(frozen=True)
class NondegeneracyCert:
    nondegenerate: bool
    unit_multiplier_multiplicity: int
    gap: float
    cluster_tol: float


def find_limit_cycle(field: VectorField, x_guess, T_guess: float,
                     opts: CycleSolveOptions | None = None) -> LimitCycle:
    """Locate a limit cycle near (x_guess, T_guess) by Newton shooting.

    The phase condition <f(x_guess), xi - x_guess> = 0 pins the anchor to the
    hyperplane through x_guess orthogonal to the local flow direction.
    """
    if not field.autonomous:
        raise DomainError("limit cycles are defined for autonomous fields only")
    opts = opts or CycleSolveOptions()
    x_guess = np.asarray(x_guess, dtype=float)
    n = field.dimension
    if x_guess.size != n:
        raise DomainError(f"x_guess has size {x_guess.size}, expected {n}")

    phase_normal = field(0.0, x_guess)
    if np.linalg.norm(phase_normal) < EQUILIBRIUM_THRESHOLD:
        raise DegenerateOrbitError("x_guess is (numerically) an equilibrium")

    xi = x_guess.copy()
    T = float(T_guess)

    def residual(xi, T):
        res = flow_with_sensitivity(field, T, 0.0, xi, opts.integrator_tol)
        r = np.empty(n + 1)
        r[:n] = res.state - xi
        r[n] = phase_normal @ (xi - x_guess)
        return r, res

    r, res = residual(xi, T)
    rnorm = np.linalg.norm(r)
    converged = rnorm <= opts.tol
    it = 0
    while not converged and it < opts.max_iter:
        jac = np.zeros((n + 1, n + 1))
        jac[:n, :n] = res.sensitivity - np.eye(n)
        jac[:n, n] = field(0.0, res.state)
        jac[n, :n] = phase_normal
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise NoCycleFoundError(f"singular shooting Jacobian: {exc}") from exc

        lam = 1.0
        accepted = False
        collapsed_trials = 0
        for _ in range(12):
            xi_try = xi + lam * step[:n]
            T_try = T + lam * step[n]
            if T_try < opts.min_period:
                collapsed_trials += 1
                lam *= 0.5
                continue
            r_try, res_try = residual(xi_try, T_try)
            if np.linalg.norm(r_try) < rnorm * (1.0 - 0.25 * lam) or np.linalg.norm(r_try) <= opts.tol:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if collapsed_trials >= 12:
                raise PeriodCollapseError(
                    f"period iterate forced below minimum {opts.min_period:.3e}"
                )
            raise NoCycleFoundError(
                f"Newton stalled after {it} iterations, residual {rnorm:.3e}"
            )
        xi, T, r, res = xi_try, T_try, r_try, res_try
        rnorm = np.linalg.norm(r)
        it += 1
        converged = rnorm <= opts.tol

    if not converged:
        raise NoCycleFoundError(
            f"Newton stalled after {it} iterations, residual {rnorm:.3e}"
        )
    if np.linalg.norm(field(0.0, xi)) < EQUILIBRIUM_THRESHOLD:
        raise DegenerateOrbitError("shooting converged to an equilibrium")

    orbit = integrate(field, (0.0, T), xi, opts.orbit_tol)
    cycle = LimitCycle(field, xi, T, orbit, residual=rnorm)
    cycle.newton_iterations = it
    return cycle


def _cluster_eigenvalues(values: np.ndarray, cluster_tol: float) -> tuple[Multiplier, ...]:
    """Greedy clustering of eigenvalues within cluster_tol (union by proximity)."""
    values = list(values)
    clusters: list[list[complex]] = []
    for v in sorted(values, key=lambda z: (z.real, z.imag)):
        for cluster in clusters:
            if any(abs(v - w) <= cluster_tol for w in cluster):
                cluster.append(v)
                break
        else:
            clusters.append([v])
    reps = [Multiplier(value=complex(np.mean(c)), multiplicity=len(c)) for c in clusters]
    reps.sort(key=lambda m: abs(m.value), reverse=True)
    return tuple(reps)


def monodromy(field: VectorField, cycle: LimitCycle,
              cluster_tol: float = DEFAULT_CLUSTER_TOL,
              tol: float | None = None) -> MonodromyData:
    """Normalized fundamental matrix at T and its clustered multipliers."""
    tol = tol if tol is not None else min(DEFAULT_TOL, cycle.orbit.tol * 100)
    res = flow_with_sensitivity(field, cycle.period, 0.0, cycle.anchor, tol)
    matrix = res.sensitivity
    eigs = np.linalg.eigvals(matrix)
    multipliers = _cluster_eigenvalues(eigs, cluster_tol)
    unit_mult = sum(m.multiplicity for m in multipliers if abs(m.value - 1.0) <= cluster_tol)
    return MonodromyData(
        matrix=matrix,
        multipliers=multipliers,
        unit_multiplier_multiplicity=unit_mult,
        cluster_tol=cluster_tol,
    )


def check_nondegenerate(mono: MonodromyData,
                        cluster_tol: float | None = None) -> NondegeneracyCert:
    """Certify that the multiplier +1 has algebraic multiplicity exactly one.

    Multipliers in the grey zone (cluster_tol, 10*cluster_tol] around +1 make
    the count unreliable and raise AmbiguousClusterError instead.
    """
    cluster_tol = cluster_tol if cluster_tol is not None else mono.cluster_tol
    unit_count = 0
    gap = np.inf
    for m in mono.multipliers:
        dist = abs(m.value - 1.0)
        if dist <= cluster_tol:
            unit_count += m.multiplicity
        elif dist <= 10.0 * cluster_tol:
            raise AmbiguousClusterError(
                f"multiplier {m.value} at distance {dist:.3e} from +1 is inside the "
                f"ambiguity zone; tighten the integration tolerance"
            )
        else:
            gap = min(gap, dist)
    if unit_count == 0:
        raise AmbiguousClusterError(
            "no multiplier within cluster_tol of +1; the data does not describe "
            "a cycle linearization at this tolerance"
        )
    return NondegeneracyCert(
        nondegenerate=(unit_count == 1),
        unit_multiplier_multiplicity=unit_count,
        gap=float(gap),
        cluster_tol=cluster_tol,
    )


def liouville_defect(field: VectorField, cycle: LimitCycle, mono: MonodromyData) -> float:
    """Relative defect of det Y(T) against exp of the integrated Jacobian trace."""
    def trace_at(t: float) -> float:
        return float(np.trace(field.jacobian_at(0.0, cycle.state(t))))

    total, _ = quad(trace_at, 0.0, cycle.period, epsabs=1e-12, epsrel=1e-12, limit=200)
    expected = np.exp(total)
    det = float(np.linalg.det(mono.matrix))
    return abs(det - expected) / abs(expected)
