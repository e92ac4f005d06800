"""Flow evaluation: adaptive integration with dense output and sensitivities.

One embedded Runge-Kutta pair of order (5,4) is used for everything so that
downstream tolerances are calibrated once.  Two interchangeable backends
implement it: a compiled extension core (built at install time) and a
pure-Python one on top of scipy.  Selection happens at import via the
CYCLESHIFT_BACKEND environment variable ("auto", "compiled", "python");
"auto" prefers the compiled core when present.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import DomainError, IntegrationFailure
from . import _scipy_backend
from .fields import VectorField, augmented_initial_state, variational_field
from .trajectory import AugmentedFlow, SensitivityResult, Trajectory, _QDense

try:
    from . import _rkcore
except ImportError:  # extension not built; pure-Python backend only
    _rkcore = None

TOL_MIN = 1e-14
TOL_MAX = 1e-3
DEFAULT_TOL = 1e-10

# rtol floor shared by both backends (scipy clamps here as well).
_RTOL_FLOOR = 100.0 * np.finfo(float).eps
_ATOL_RATIO = 1e-3
_MAX_STEPS = 5_000_000

_env_choice = os.environ.get("CYCLESHIFT_BACKEND", "auto").strip().lower()
if _env_choice not in ("auto", "compiled", "python"):
    raise DomainError(
        f"CYCLESHIFT_BACKEND must be auto, compiled or python, got {_env_choice!r}"
    )
if _env_choice == "compiled" and _rkcore is None:
    raise DomainError("CYCLESHIFT_BACKEND=compiled but the extension core is not built")

_default_backend = "python" if (_env_choice == "python" or _rkcore is None) else "compiled"


def backend_name() -> str:
    """Name of the backend used when none is requested explicitly."""
    return _default_backend


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _rkcore is not None else ("python",)


def set_default_backend(name: str) -> None:
    global _default_backend
    if name not in available_backends():
        raise DomainError(f"backend {name!r} not available; have {available_backends()}")
    _default_backend = name


def _run_compiled(rhs, length, y0, rtol, atol, max_step, max_steps):
    ts, ys, qs, status, nfev = _rkcore.integrate_dopri5(
        rhs, length, y0, rtol, atol, max_step, max_steps
    )
    ok = status == _rkcore.STATUS_OK
    dense = _QDense(ts, ys, qs) if len(ts) > 1 else None
    return dense, ts, ys, nfev, ok, float(ts[-1])


def integrate(field: VectorField, span: tuple[float, float], x_init,
              tol: float = DEFAULT_TOL, max_step: float | None = None,
              backend: str | None = None) -> Trajectory:
    """Integrate the field over span from x_init with local error control at tol.

    The span may run in either time direction; backward spans are handled by
    integrating the time-reversed field.  Raises DomainError for inputs
    outside the contract and IntegrationFailure (carrying the last reached
    time) when step control collapses, e.g. at a finite-time blow-up.
    """
    if not (TOL_MIN <= tol <= TOL_MAX):
        raise DomainError(f"tol must lie in [{TOL_MIN}, {TOL_MAX}], got {tol}")
    t0, t1 = float(span[0]), float(span[1])
    if t0 == t1:
        raise DomainError("degenerate span: t0 == t1")
    x0 = np.ascontiguousarray(x_init, dtype=float)
    if x0.ndim != 1 or x0.size != field.dimension:
        raise DomainError(
            f"x_init has shape {x0.shape}, expected ({field.dimension},)"
        )
    if not np.all(np.isfinite(x0)):
        raise DomainError("x_init contains non-finite entries")

    sign = 1.0 if t1 > t0 else -1.0
    length = abs(t1 - t0)
    f = field.rhs

    if sign > 0 and t0 == 0.0:
        rhs = f
    elif sign > 0:
        def rhs(s, y):
            return f(t0 + s, y)
    else:
        def rhs(s, y):
            return -np.asarray(f(t0 - s, y))

    f0 = np.asarray(rhs(0.0, x0), dtype=float)
    if f0.shape != x0.shape:
        raise DomainError(
            f"rhs returned shape {f0.shape}, expected {x0.shape}"
        )
    if not np.all(np.isfinite(f0)):
        raise DomainError("vector field returned non-finite values at the initial state")

    rtol = max(tol, _RTOL_FLOOR)
    atol = tol * _ATOL_RATIO
    h_max = length if max_step is None else float(max_step)

    chosen = backend or _default_backend
    if chosen == "compiled":
        if _rkcore is None:
            raise DomainError("compiled backend requested but not built")
        runner = _run_compiled
    elif chosen == "python":
        runner = _scipy_backend.run
    else:
        raise DomainError(f"unknown backend {chosen!r}")

    dense, knots, values, nfev, ok, s_last = runner(
        rhs, length, x0, rtol, atol, h_max, _MAX_STEPS
    )
    if not ok:
        raise IntegrationFailure(
            "step-size control failed (stiffness, blow-up or non-finite rhs)",
            last_time=t0 + sign * s_last,
        )
    return Trajectory(t0, t1, dense, knots, values, tol, nfev, chosen)


def flow(field: VectorField, t: float, t0: float, xi, tol: float = DEFAULT_TOL,
         backend: str | None = None) -> np.ndarray:
    """State of the solution through (t0, xi) at time t."""
    if t == t0:
        return np.asarray(xi, dtype=float).copy()
    return integrate(field, (t0, t), xi, tol, backend=backend).endpoint()


def integrate_with_sensitivity(field: VectorField, span: tuple[float, float], xi,
                               tol: float = DEFAULT_TOL,
                               backend: str | None = None) -> AugmentedFlow:
    """Dense flow plus flow derivative along span (augmented n + n^2 system)."""
    aug = variational_field(field)
    traj = integrate(aug, span, augmented_initial_state(xi), tol, backend=backend)
    return AugmentedFlow(traj, field.dimension)


def flow_with_sensitivity(field: VectorField, t: float, t0: float, xi,
                          tol: float = DEFAULT_TOL,
                          backend: str | None = None) -> SensitivityResult:
    """Flow value and its derivative with respect to the initial state.

    The variational equation is integrated jointly with the state; at t == t0
    the sensitivity is the identity.
    """
    xi = np.asarray(xi, dtype=float)
    if t == t0:
        return SensitivityResult(state=xi.copy(), sensitivity=np.eye(xi.size))
    return integrate_with_sensitivity(field, (t0, t), xi, tol, backend=backend).at(t)
