"""Exception types raised across the package."""


class MrfAmpError(Exception):
    """Base class for all package errors."""


class InvalidWindowError(MrfAmpError, ValueError):
    pass


class InvalidOffsetError(MrfAmpError, ValueError):
    pass


class ShapeError(MrfAmpError, ValueError):
    pass


class InconsistentParametersError(MrfAmpError, ValueError):
    """The (p, q, r, s) parameters do not define a valid block law."""


class DegenerateMeasureError(MrfAmpError, ValueError):
    pass


class WindowTooLargeError(MrfAmpError, ValueError):
    pass


class UnsupportedDimensionError(MrfAmpError, ValueError):
    pass


class InvalidSizeError(MrfAmpError, ValueError):
    pass


class ZeroSignalError(MrfAmpError, ValueError):
    pass


class InvalidNoiseLevelError(MrfAmpError, ValueError):
    pass


class DegenerateLikelihoodError(MrfAmpError, ArithmeticError):
    pass


class DegeneratePriorError(MrfAmpError, ValueError):
    pass


class DivergenceError(MrfAmpError, ArithmeticError):
    """Non-finite values appeared during the AMP recursion."""

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"non-finite values at iteration {iteration}")


class ConfigError(MrfAmpError, ValueError):
    """Raised with the full list of violated preconditions."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))
