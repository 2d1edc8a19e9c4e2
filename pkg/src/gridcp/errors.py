"""Exception types shared across the package.

All data-validation failures subclass :class:`ValueError` so callers can
handle them generically; the CLI maps them to exit code 1, while plain
``OSError`` (file system failures) maps to exit code 2.
"""


class GridError(ValueError):
    """Base class for grid/data validation failures."""


class HeaderPayloadMismatch(GridError):
    """Container header and binary payload disagree (shape, dtype, length)."""


class InvariantViolation(GridError):
    """A grid invariant failed; the message carries pixel coordinates."""


class NonFiniteInput(GridError):
    """Input contains NaN or infinity where finite values are required."""


class LabelOutOfRange(InvariantViolation):
    """Class index outside ``[0, num_classes)``."""


class ShapeMismatch(GridError):
    """Two grids that must share dimensions do not."""


class EmptyCalibrationSet(GridError):
    """No calibration pixels available."""


class UnlabeledCalPixel(GridError):
    """A calibration pixel has no ground-truth label."""


class EmptyTestSet(GridError):
    """No test pixels available for a metric."""


class EmptyInput(GridError):
    """An oracle routine received an empty score sample."""


class NotEnoughLabeledPixels(GridError):
    """Too few labeled pixels to build the requested split."""


class InvalidConfig(GridError):
    """Configuration value outside its legal range."""


class TieDetectedWarning(UserWarning):
    """Exact score ties found where a tie-free sample is assumed.

    The closed-form set-size identity counts calibration scores with a
    non-strict comparison while the exceedance rate uses a strict one, so
    the two sides can disagree by (number of ties)/(n + 1) on tied inputs.
    """
