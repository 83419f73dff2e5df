"""Exception hierarchy.

Input problems derive from :class:`InputError` (CLI exit code 2), undefined
metrics from :class:`UndefinedMetricError` (exit 3) and numerical breakdowns
from :class:`NumericalFailure` (exit 4).
"""


class GradTraceError(Exception):
    """Base class for all errors raised by this package."""


class InputError(GradTraceError, ValueError):
    pass


class TraceFormatError(InputError):
    """Bad magic bytes, unknown version or unknown dtype code."""


class TraceCorruptionError(InputError):
    """Header fields disagree with the payload."""


class TraceValidationError(InputError):
    """A trace entry is not finite."""

    def __init__(self, row, step, value):
        self.row = row
        self.step = step
        self.value = value
        super().__init__(f"non-finite entry {value!r} at row {row}, step {step}")


class ConfigError(InputError):
    pass


class PreconditionError(InputError):
    pass


class DimensionError(InputError):
    pass


class UndefinedMetricError(GradTraceError, ArithmeticError):
    """A metric whose denominator vanishes (zero energy)."""

    def __init__(self, metric, message=None):
        self.metric = metric
        super().__init__(message or f"{metric} is undefined: zero energy")


class NumericalFailure(GradTraceError, RuntimeError):
    pass


class SpectrumError(NumericalFailure):
    """The singular value decomposition did not converge."""


class DivergenceError(NumericalFailure):
    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite value at step {step}")
