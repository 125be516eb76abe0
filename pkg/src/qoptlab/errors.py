"""Exception hierarchy shared across the package."""


class QoptLabError(Exception):
    """Base class for all package errors."""


class MachineFormatError(QoptLabError):
    """A machine document is malformed.

    ``locus`` names the offending field or delta entry.
    """

    def __init__(self, message, locus=None):
        self.locus = locus
        if locus is not None:
            message = f"{locus}: {message}"
        super().__init__(message)


class UndeclaredSymbolError(MachineFormatError):
    pass


class NonTotalDeltaError(MachineFormatError):
    pass


class SpaceTooLargeError(QoptLabError):
    def __init__(self, size, cap):
        self.size = size
        self.cap = cap
        super().__init__(f"configuration space has {size} elements (cap {cap})")


class InputTooLongError(QoptLabError):
    pass


class IndexSizeMismatchError(QoptLabError):
    pass


class TravelBudgetExceededError(QoptLabError):
    pass


class HaltingError(QoptLabError):
    """Amplitude mass is split between final and non-final configurations."""


class NotInPreQueryStateError(QoptLabError):
    pass


class DimensionCapError(QoptLabError):
    pass


class InvariantViolationError(QoptLabError):
    pass


class NonSymmetricError(QoptLabError):
    pass


class BracketingError(QoptLabError):
    def __init__(self, message, interval=None):
        self.interval = interval
        super().__init__(message)


class NonMonotoneOracleError(QoptLabError):
    pass


class BoundaryAmbiguityError(QoptLabError):
    def __init__(self, message, value=None, bits=None):
        self.value = value
        self.bits = bits
        super().__init__(message)


class ConvergenceError(QoptLabError):
    pass


class SourceNotCleanError(QoptLabError):
    pass


class BoundViolationError(QoptLabError):
    pass


class QuantizationError(QoptLabError):
    pass


class MissingReductionError(QoptLabError):
    pass
