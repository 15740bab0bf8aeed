"""Exception types raised by fracstream."""


class FracStreamError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(FracStreamError, ValueError):
    """Non-finite values, wrong shapes or out-of-range arguments."""


class DimensionError(InvalidInputError):
    pass


class FactorizationError(FracStreamError, ArithmeticError):
    """The sparse system matrix is not symmetric positive definite."""


class ZeroColumnError(InvalidInputError):
    """The first column handed to the streaming SVD is zero."""


class ConfigError(FracStreamError, ValueError):
    """Invalid run or benchmark configuration."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
