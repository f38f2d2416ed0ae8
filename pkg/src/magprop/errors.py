"""Exception hierarchy.

Two families matter downstream: validation errors (bad arguments, excluded
parameter regions) and numerical failures (a computation that was attempted
and did not succeed). The CLI maps them to exit codes 2 and 3 respectively.
"""

__all__ = [
    "MagpropError",
    "ValidationError",
    "CausticError",
    "DegeneratePinningError",
    "NumericalError",
    "SingularOperatorError",
    "IllConditionedError",
    "ConvergenceError",
    "AdjudicationError",
]


class MagpropError(Exception):
    """Base class for everything raised deliberately by this package."""


class ValidationError(MagpropError, ValueError):
    """An argument or query violates a documented precondition."""


class CausticError(ValidationError):
    """The requested time sits too close to a focal time where cos(kt) = 0."""


class DegeneratePinningError(ValidationError):
    """The pinning matrix fails its positivity/nondegeneracy condition."""


class NumericalError(MagpropError, RuntimeError):
    """A numerical procedure failed or refused to certify its result."""


class SingularOperatorError(NumericalError):
    """A linear solve hit an (effectively) singular operator."""


class IllConditionedError(NumericalError):
    """Reciprocal condition estimate below the trust threshold."""


class ConvergenceError(NumericalError):
    """An extrapolation or quadrature did not settle within its budget."""


class AdjudicationError(NumericalError):
    """The variant adjudication did not produce a unique winner."""
