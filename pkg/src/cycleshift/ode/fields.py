"""Vector fields and their Jacobians.

A VectorField bundles the right-hand side of an ODE with an optional
analytic Jacobian; a central finite-difference Jacobian with step
h = max(1e-6, 1e-6 * ||x||) is substituted wherever a Jacobian is required
but none was supplied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import DomainError

RhsFunc = Callable[[float, np.ndarray], np.ndarray]
JacFunc = Callable[[float, np.ndarray], np.ndarray]

_FD_STEP = 1e-6


@dataclass(frozen=True)
class VectorField:
    """Right-hand side of x' = rhs(t, x) with dimension and Jacobian info."""

    dimension: int
    rhs: RhsFunc
    jacobian: Optional[JacFunc] = None
    autonomous: bool = True

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError(f"field dimension must be >= 1, got {self.dimension}")

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.rhs(t, x), dtype=float)

    def jacobian_at(self, t: float, x: np.ndarray) -> np.ndarray:
        """Analytic Jacobian if available, else central finite differences."""
        if self.jacobian is not None:
            return np.asarray(self.jacobian(t, x), dtype=float)
        return fd_jacobian(self.rhs, t, x)


def fd_jacobian(rhs: RhsFunc, t: float, x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian with step max(1e-6, 1e-6*||x||)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = max(_FD_STEP, _FD_STEP * float(np.linalg.norm(x)))
    jac = np.empty((n, n))
    for j in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.asarray(rhs(t, xp), dtype=float) - np.asarray(rhs(t, xm), dtype=float)) / (2.0 * h)
    return jac


def variational_field(field: VectorField) -> VectorField:
    """Augment a field with its first-variation flow.

    The augmented state is [x, vec(Y)] with Y' = f'(t, x) Y, Y(t0) = I,
    so integrating it yields the flow together with its derivative with
    respect to the initial state.
    """
    n = field.dimension

    def rhs(t: float, u: np.ndarray) -> np.ndarray:
        x = u[:n]
        y = u[n:].reshape(n, n)
        out = np.empty(n + n * n)
        out[:n] = field.rhs(t, x)
        out[n:] = (field.jacobian_at(t, x) @ y).reshape(-1)
        return out

    return VectorField(dimension=n + n * n, rhs=rhs, jacobian=None, autonomous=field.autonomous)


def augmented_initial_state(xi: np.ndarray) -> np.ndarray:
    """Initial state [xi, vec(I)] for the variational augmentation."""
    xi = np.asarray(xi, dtype=float)
    n = xi.size
    return np.concatenate([xi, np.eye(n).reshape(-1)])
