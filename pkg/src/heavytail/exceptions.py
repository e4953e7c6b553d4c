"""Exception hierarchy.

Every error raised on purpose by this package derives from
:class:`HeavyTailError`, which is itself a ``ValueError`` so that callers
treating bad input generically keep working.
"""


class HeavyTailError(ValueError):
    """Base class for all package errors."""


class ParameterDomainError(HeavyTailError):
    """A parameter lies outside its admissible domain."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DataDomainError(HeavyTailError):
    """Observed data are incompatible with the requested family."""


class EmptyInputError(HeavyTailError):
    pass


class UnsupportedEvaluationError(HeavyTailError):
    """The family has no closed-form density/cdf (sampling only)."""


class InfiniteMomentError(HeavyTailError):
    pass


class FitConvergenceError(HeavyTailError):
    """Optimizer failed; ``trace`` holds the evaluated iterates."""

    def __init__(self, message, trace=()):
        self.trace = list(trace)
        super().__init__(message)


class ThresholdDegeneracyError(HeavyTailError):
    pass


class IncomparableReportsError(HeavyTailError):
    pass


class InsufficientTailError(HeavyTailError):
    pass


class ResolutionError(HeavyTailError):
    """Too few Monte Carlo tail events to resolve the requested quantity."""


class ShapeError(HeavyTailError):
    pass


class IncomparableError(HeavyTailError):
    """Weight vectors with different totals or lengths cannot be ordered."""


class DegenerateScanError(HeavyTailError):
    pass


class BoundUndefinedError(HeavyTailError):
    pass


class EnvelopeError(HeavyTailError):
    pass


class UnsupportedMarginalError(HeavyTailError):
    pass


class UnboundedBaseError(HeavyTailError):
    pass


class DatasetValidationError(HeavyTailError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class EmptyDatasetError(DatasetValidationError):
    pass


class ConfigError(HeavyTailError):
    pass
