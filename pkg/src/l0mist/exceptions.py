"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Raised when array shapes are incompatible."""


class InvalidConfigError(ValueError):
    """Raised for solver or experiment settings outside their valid range."""


class SpectralNormError(RuntimeError):
    """Power iteration failed to reach the requested tolerance.

    The best estimate obtained so far is kept on ``estimate``.
    """

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


class DivergenceError(ArithmeticError):
    """A solver produced non-finite iterates or objective values."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ZeroResidualError(ValueError):
    """EBIC is undefined because the fit interpolates the data exactly."""


class InputFormatError(ValueError):
    """Malformed instance file; carries the path and 1-based line number."""

    def __init__(self, path, line, message):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line
