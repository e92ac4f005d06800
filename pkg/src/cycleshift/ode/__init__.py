"""Numerical integration engine: flows, dense trajectories, sensitivities."""

from .fields import VectorField, fd_jacobian, variational_field
from .integrate import (
    DEFAULT_TOL,
    available_backends,
    backend_name,
    flow,
    flow_with_sensitivity,
    integrate,
    integrate_with_sensitivity,
    set_default_backend,
)
from .trajectory import AugmentedFlow, SensitivityResult, Trajectory

__all__ = [
    "DEFAULT_TOL",
    "AugmentedFlow",
    "SensitivityResult",
    "Trajectory",
    "VectorField",
    "available_backends",
    "backend_name",
    "fd_jacobian",
    "flow",
    "flow_with_sensitivity",
    "integrate",
    "integrate_with_sensitivity",
    "set_default_backend",
    "variational_field",
]
