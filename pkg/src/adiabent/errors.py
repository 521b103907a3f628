"""Exception hierarchy shared by all modules."""


class AdiabentError(Exception):
    """Base class for library errors."""


class ValidationError(AdiabentError, ValueError):
    """Input violates a documented precondition."""


class PoleError(ValidationError):
    """Evaluation point coincides with a pole of the secular function."""


class SingularError(ValidationError):
    """A quantity required as a divisor vanishes."""


class AmbiguousRegionError(ValidationError):
    """Coupling lies inside a guard band around a critical value."""


class UnsupportedPredictionError(ValidationError):
    """Closed-form prediction is not available for this input."""


class NumericalError(AdiabentError, ArithmeticError):
    """An iterative method failed to converge or a result is non-finite."""


class DivergenceError(NumericalError):
    """A spectral gap collapsed below the resolvable floor."""
