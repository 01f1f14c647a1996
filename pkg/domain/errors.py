class DacLinError(Exception):
    """Base class of every error the package raises on purpose."""


class ConfigurationError(DacLinError, ValueError):
    """Invalid or mutually inconsistent configuration."""


class ArgumentError(ConfigurationError):
    pass


class CodeRangeError(ConfigurationError):
    pass


class DesignError(ConfigurationError):
    """A filter that cannot be realized, e.g. a cutoff at or above Nyquist."""


class AmbiguityError(ConfigurationError):
    """A tone bin coincides with an intermodulation product bin.

    ``bins`` holds the colliding bin indices so the caller can re-plan the
    stimulus instead of guessing which tone is at fault.
    """

    def __init__(self, message, bins=()):
        super().__init__(message)
        self.bins = tuple(bins)


class NumericalError(DacLinError, ArithmeticError):
    """A computation that ran but produced an unusable result."""


class TrainingError(NumericalError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class FittingError(NumericalError):
    pass


class DegenerateEstimateError(NumericalError):
    pass
