"""Exception types shared across the package."""


class TscausalError(Exception):
    """Base class for all package-specific errors."""


class ParseError(TscausalError):
    """A file could not be parsed; message includes the offending row."""


class IntegrityError(TscausalError):
    """Input data violates a structural requirement (e.g. duplicate timestamps)."""


class EmptyInputError(TscausalError):
    """An input file or collection contained no usable data."""


class DegenerateVariableError(TscausalError):
    """A variable is constant (zero variance) where variation is required."""


class UndefinedCorrelationError(TscausalError):
    """A correlation was requested for a constant input vector."""


class InsufficientDataError(TscausalError):
    """Too few samples remain to carry out the requested computation."""


class ConditioningError(TscausalError):
    """The conditioning matrix is rank deficient."""
