"""Exception hierarchy shared by all rmt_kit modules."""


class RMTKitError(Exception):
    """Base class for every error raised by rmt_kit."""


class DomainError(RMTKitError, ValueError):
    """Argument outside the mathematical domain (branch cut, non-finite input)."""


class RangeError(RMTKitError, OverflowError):
    """Result would overflow the configured guard."""


class AccuracyError(RMTKitError, ArithmeticError):
    """An adaptive scheme hit its budget before reaching the tolerance.

    Attributes
    ----------
    value : complex or ndarray
        Best available (partial) result.
    est_error : float
        Last successive-difference estimate.
    """

    def __init__(self, message, value=None, est_error=float("nan")):
        super().__init__(message)
        self.value = value
        self.est_error = est_error


class GeometryError(RMTKitError, ValueError):
    """No admissible contour exists for the requested configuration."""


class ValidationError(RMTKitError, ValueError):
    """Ensemble parameters violate a convergence constraint.

    Attributes
    ----------
    constraint : str
        Name of the violated inequality ("aqd", "constraint3", "allbounds", "shape").
    violations : list
        Offending index pairs, 1-based.
    """

    def __init__(self, message, constraint="", violations=()):
        super().__init__(message)
        self.constraint = constraint
        self.violations = list(violations)


class DegeneracyError(RMTKitError, ValueError):
    """Closed-form or Gram path requested with coalescing parameters."""


class ConditioningError(RMTKitError, ArithmeticError):
    """Matrix too ill-conditioned to invert reliably."""

    def __init__(self, message, condition=float("nan")):
        super().__init__(message)
        self.condition = condition


class MethodError(RMTKitError, ValueError):
    """Evaluation method not available for this kernel."""


class ConfigError(RMTKitError, ValueError):
    """Malformed run configuration."""
