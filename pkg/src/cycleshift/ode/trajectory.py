"""Dense ODE solutions.

A Trajectory wraps the accepted-step grid plus interpolation data of one
integration run and supports evaluation anywhere inside its span.  Values
are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError

# Relative slack when validating evaluation times against the span; covers
# round-off from callers doing arithmetic on the endpoints.
_SPAN_SLACK = 1e-9


class _QDense:
    """Segment-polynomial interpolant (Shampine form) from the compiled core.

    On segment k with step h_k the value is
        y(t_k + theta*h_k) = y_k + h_k * Q_k @ [theta, theta^2, theta^3, theta^4].
    """

    def __init__(self, ts: np.ndarray, ys: np.ndarray, qs: np.ndarray):
        self.ts = ts
        self.ys = ys
        self.qs = qs

    def _locate(self, s: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.ts, s, side="right") - 1
        return np.clip(idx, 0, len(self.ts) - 2)

    def __call__(self, s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        idx = self._locate(s_arr)
        h = self.ts[idx + 1] - self.ts[idx]
        theta = (s_arr - self.ts[idx]) / h
        # powers: (m, 4) -> theta, theta^2, theta^3, theta^4
        powers = theta[:, None] ** np.arange(1, 5)[None, :]
        vals = self.ys[idx] + h[:, None] * np.einsum("knj,kj->kn", self.qs[idx], powers)
        return vals[0] if np.isscalar(s) or np.ndim(s) == 0 else vals

    def derivative(self, s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        idx = self._locate(s_arr)
        h = self.ts[idx + 1] - self.ts[idx]
        theta = (s_arr - self.ts[idx]) / h
        dpowers = np.arange(1, 5)[None, :] * theta[:, None] ** np.arange(0, 4)[None, :]
        vals = np.einsum("knj,kj->kn", self.qs[idx], dpowers)
        return vals[0] if np.isscalar(s) or np.ndim(s) == 0 else vals


class _ScipyDense:
    """Adapter around scipy's OdeSolution."""

    def __init__(self, sol):
        self.sol = sol

    def __call__(self, s):
        vals = self.sol(s)
        return vals.T if np.ndim(s) else vals

    def _derivative_one(self, s: float) -> np.ndarray:
        # differentiate the segment polynomial y_old + h * Q @ [x, x^2, ...]
        idx = np.searchsorted(self.sol.ts, s, side="right") - 1
        seg = self.sol.interpolants[int(np.clip(idx, 0, len(self.sol.interpolants) - 1))]
        x = (s - seg.t_old) / seg.h
        powers = np.arange(1, seg.Q.shape[1] + 1)
        return seg.Q @ (powers * x ** (powers - 1))

    def derivative(self, s, h: float = 1e-7):
        try:
            s_arr = np.atleast_1d(np.asarray(s, dtype=float))
            vals = np.array([self._derivative_one(si) for si in s_arr])
            return vals if np.ndim(s) else vals[0]
        except AttributeError:
            # unexpected interpolant type: fall back to finite differences
            lo, hi = self.sol.t_min, self.sol.t_max
            sm = np.clip(np.asarray(s, dtype=float) - h, lo, hi)
            sp = np.clip(np.asarray(s, dtype=float) + h, lo, hi)
            vals = (self.sol(sp) - self.sol(sm)) / (sp - sm)
            return vals.T if np.ndim(s) else vals


class Trajectory:
    """Dense solution of one integration over the (possibly reversed) span."""

    def __init__(self, t0: float, t1: float, dense, knots: np.ndarray,
                 values: np.ndarray, tol: float, nfev: int, backend: str):
        self.t0 = float(t0)
        self.t1 = float(t1)
        self._dense = dense
        self._sign = 1.0 if t1 >= t0 else -1.0
        self._length = abs(t1 - t0)
        self.knots = knots            # internal (increasing) accepted grid
        self.knot_values = values
        self.tol = tol
        self.nfev = nfev
        self.backend = backend

    @property
    def span(self) -> tuple[float, float]:
        return (self.t0, self.t1)

    @property
    def dimension(self) -> int:
        return self.knot_values.shape[1]

    @property
    def times(self) -> np.ndarray:
        """Accepted-step grid in caller time (monotone from t0 to t1)."""
        return self.t0 + self._sign * self.knots

    def _internal(self, t) -> np.ndarray:
        s = (np.asarray(t, dtype=float) - self.t0) * self._sign
        slack = _SPAN_SLACK * max(1.0, self._length)
        if np.any(s < -slack) or np.any(s > self._length + slack):
            raise DomainError(
                f"evaluation time outside span [{self.t0}, {self.t1}]"
            )
        return np.clip(s, 0.0, self._length)

    def eval(self, t):
        """State at time t (scalar -> vector, array -> matrix of rows)."""
        return self._dense(self._internal(t))

    __call__ = eval

    def derivative(self, t):
        """Time derivative of the interpolant at t (diagnostic use)."""
        ds = self._dense.derivative(self._internal(t))
        return self._sign * ds

    def endpoint(self) -> np.ndarray:
        return self.knot_values[-1].copy()


@dataclass(frozen=True)
class SensitivityResult:
    """Flow value and its derivative with respect to the initial state."""

    state: np.ndarray
    sensitivity: np.ndarray


class AugmentedFlow:
    """View of a variational (state + sensitivity) trajectory."""

    def __init__(self, trajectory: Trajectory, dimension: int):
        self.trajectory = trajectory
        self.n = dimension

    def state(self, t) -> np.ndarray:
        return self.trajectory.eval(t)[..., : self.n]

    def sensitivity(self, t) -> np.ndarray:
        flat = self.trajectory.eval(t)[..., self.n:]
        return flat.reshape(flat.shape[:-1] + (self.n, self.n))

    def at(self, t) -> SensitivityResult:
        u = self.trajectory.eval(t)
        return SensitivityResult(state=u[: self.n].copy(),
                                 sensitivity=u[self.n:].reshape(self.n, self.n).copy())
