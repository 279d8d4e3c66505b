"""Exception hierarchy shared by all modules."""


class WidthSDEError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(WidthSDEError, ValueError):
    pass


class ProfileError(WidthSDEError, ValueError):
    """Profile violates admissibility (negative values, poor truncation, ...)."""


class NonpositiveDivisorCoefficient(ProfileError):
    pass


class InvalidPhysicalInput(WidthSDEError, ValueError):
    pass


class NonpositiveWidth(WidthSDEError, ValueError):
    pass


class NonpositiveXi(WidthSDEError, ValueError):
    pass


class NumericalOverflow(WidthSDEError, ArithmeticError):
    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class StepBlowUp(WidthSDEError, ArithmeticError):
    """A discrete step pushed the width to x <= 0.  ``path`` holds the truncated path."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class GridExhausted(WidthSDEError, RuntimeError):
    pass


class InsufficientData(WidthSDEError, ValueError):
    pass


class WindowMismatch(WidthSDEError, ValueError):
    pass


class PositivityViolated(WidthSDEError, ArithmeticError):
    pass
