"""Exception hierarchy shared across the package."""


class AqaError(Exception):
    """Base class for all library errors."""


class ArgumentError(AqaError, ValueError):
    """A caller-supplied argument violates a precondition."""


class NumericError(AqaError, ArithmeticError):
    """A computation produced a non-finite value."""


class DataError(AqaError):
    """Manifest or feature-file problems."""


class ManifestError(DataError):
    """Malformed or inconsistent sample manifest."""


class SampleTooLongError(DataError):
    """Raw frame count exceeds the padding target."""


class InsufficientFramesError(DataError):
    """Not even one clip fits at the largest augmentation offset."""


class DegenerateActionError(DataError):
    """An action has too few samples or zero score variance."""


class UnknownActionError(DataError):
    """Action name absent from the registry or stats map."""


class FormatError(DataError):
    """Binary feature/checkpoint file fails header or payload checks."""


class DimensionMismatchError(DataError):
    """File or tensor dimensions disagree with the configuration."""


class DegenerateMetricError(AqaError):
    """Correlation undefined: zero-variance input."""
