"""Exception hierarchy shared across the package."""


class SplitgeoError(Exception):
    """Base class for all errors raised by this package."""


class ExpressionSyntaxError(SplitgeoError):
    """Malformed expression text; carries the 1-based column."""

    def __init__(self, message, column):
        super().__init__(f"{message} (column {column})")
        self.column = column


class EvaluationError(SplitgeoError):
    """Expression evaluation failed (unbound variable, domain error)."""


class DomainError(SplitgeoError):
    """A point lies outside the region where a field is defined."""


class MetricDegeneracyError(SplitgeoError):
    """The metric failed a positivity / non-degeneracy check."""


class FrameError(SplitgeoError):
    """An orthonormal frame could not be constructed."""


class ImmersionError(SplitgeoError):
    """Rank-deficient jacobian or non-spacelike induced metric."""


class UsageError(SplitgeoError):
    """An operation was called with inconsistent arguments."""


class UnsupportedDimensionError(UsageError):
    """Operation restricted to submanifold dimension n > 2."""


class ScenarioError(SplitgeoError):
    """Scenario file failed validation; carries a path into the document."""

    def __init__(self, message, path=""):
        loc = f" at {path}" if path else ""
        super().__init__(f"{message}{loc}")
        self.path = path
