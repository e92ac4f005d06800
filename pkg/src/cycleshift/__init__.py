"""cycleshift: phase shifts and bifurcation functions for perturbed limit cycles.

Given an autonomous ODE with a nondegenerate limit cycle and a small
T-periodic forcing, the library locates the cycle and the forced periodic
solution, computes the transversal-surface phase shift that restores
O(eps) convergence, and evaluates the Floquet-eigenfunction bifurcation
functions that control the direction and size of the offset.
"""

__version__ = "0.1.0"

from . import analysis, cycle, floquet, ode, perturb, problems
from .errors import CycleShiftError

__all__ = [
    "CycleShiftError",
    "__version__",
    "analysis",
    "cycle",
    "floquet",
    "ode",
    "perturb",
    "problems",
]
