"""Exception hierarchy shared by every stage of the pipeline."""


class RotorBarError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(RotorBarError, ValueError):
    pass


class DataError(RotorBarError, ValueError):
    """Raised when input data cannot be processed (CLI exit code 2)."""


class InsufficientSignal(DataError):
    pass


class NoCrossings(DataError):
    pass


class EmptySignal(DataError):
    pass


class DegenerateSignal(DataError):
    pass


class EmptyNode(DataError):
    pass


class EmptyDataset(DataError):
    pass


class DegenerateLabels(DataError):
    pass


class InsufficientClassSamples(DataError):
    pass


class UndefinedMetric(DataError):
    pass


class FeatureArityError(DataError):
    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class ConvergenceError(RotorBarError, RuntimeError):
    def __init__(self, message, grad_norm):
        super().__init__(f"{message} (final gradient norm {grad_norm:.3e})")
        self.grad_norm = grad_norm
