"""Exception hierarchy for cycleshift.

Every failure mode that callers are expected to handle gets its own class;
generic numerical trouble that indicates a bug stays a bare RuntimeError.
"""

from __future__ import annotations


class CycleShiftError(Exception):
    """Base class for all library-specific errors."""


class DomainError(CycleShiftError):
    """Inputs outside the documented domain (bad tolerance, non-finite rhs, ...)."""


class IntegrationFailure(CycleShiftError):
    """The integrator could not complete the requested span.

    Attributes
    ----------
    last_time : float
        Last time the integrator reached before giving up.
    """

    def __init__(self, message: str, last_time: float):
        super().__init__(f"{message} (last reached time {last_time:.6g})")
        self.last_time = last_time


class NoCycleFoundError(CycleShiftError):
    """Newton shooting for the limit cycle did not converge."""


class DegenerateOrbitError(CycleShiftError):
    """The cycle solver converged to an equilibrium instead of an orbit."""


class PeriodCollapseError(CycleShiftError):
    """The period iterate fell below the configured minimum."""


class AmbiguousClusterError(CycleShiftError):
    """A multiplier sits in the grey zone around +1; tighten tolerances."""


class UnsupportedSpectrumError(CycleShiftError):
    """The adjoint monodromy has complex multipliers (not supported).

    Carries the offending spectrum so callers can report it.
    """

    def __init__(self, message: str, spectrum):
        super().__init__(message)
        self.spectrum = spectrum


class DefectiveSpectrumError(CycleShiftError):
    """The monodromy does not admit a full eigenvector basis."""


class NormalizationImpossibleError(CycleShiftError):
    """<x0'(0), z0(0)> vanished; contradicts nondegeneracy, numerics at fault."""


class IllConditionedBasisError(CycleShiftError):
    """Eigenfunction matrix numerically singular at some time.

    Attributes
    ----------
    time : float
        Grid time at which the basis matrix failed.
    """

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g})")
        self.time = time


class ExistenceNotEstablishedError(CycleShiftError):
    """Shooting for the forced periodic solution did not converge."""


class InvalidSurfaceMatrixError(CycleShiftError):
    """(x0'(0), A) is singular; A does not define a transversal surface."""


class TransversalityFailureError(CycleShiftError):
    """Transversality margin below threshold.

    Attributes
    ----------
    margin : float
        The offending smallest singular value.
    """

    def __init__(self, message: str, margin: float):
        super().__init__(f"{message} (margin {margin:.3e})")
        self.margin = margin


class ShiftNotFoundError(CycleShiftError):
    """No crossing of the periodic solution with the surface inside the box.

    Attributes
    ----------
    best_residual : float
        Smallest residual norm seen before giving up.
    """

    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


class DegenerateCrossingError(CycleShiftError):
    """Shift-equation Jacobian singular at the candidate crossing."""


class DegenerateMultiplierError(CycleShiftError):
    """|rho - 1| too small for the rho/(rho-1) prefactor to make sense."""


class NoPeriodicFirstVariationError(CycleShiftError):
    """Fredholm solvability fails: the Malkin function does not vanish at 0.

    Attributes
    ----------
    malkin_at_zero : float
        The offending value of the Malkin function at t = 0.
    """

    def __init__(self, message: str, malkin_at_zero: float):
        super().__init__(f"{message} (M_z0(0) = {malkin_at_zero:.3e})")
        self.malkin_at_zero = malkin_at_zero


class InvalidDataError(CycleShiftError):
    """Data unsuitable for the requested fit or check."""


class ConfigError(CycleShiftError):
    """Malformed CLI configuration; message names the offending field."""
