"""Pure-Python integration backend built on scipy's RK45.

scipy's RK45 is the same Dormand-Prince 5(4) pair with the same Shampine
dense interpolant as the compiled core, so the backends are interchangeable
up to round-off-level differences in step placement.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from .trajectory import _ScipyDense


def run(rhs, length: float, y0: np.ndarray, rtol: float, atol: float,
        max_step: float, max_steps: int):
    """Integrate over [0, length]; returns (dense, knots, values, nfev, ok, t_last)."""
    sol = solve_ivp(
        rhs,
        (0.0, length),
        y0,
        method="RK45",
        rtol=rtol,
        atol=atol,
        max_step=max_step,
        dense_output=True,
    )
    ok = sol.status == 0
    t_last = float(sol.t[-1])
    dense = _ScipyDense(sol.sol) if sol.sol is not None else None
    return dense, sol.t, sol.y.T, int(sol.nfev), ok, t_last
