"""Exception types shared across the package."""


class RandresError(Exception):
    """Base class for package errors."""


class ConfigError(RandresError, ValueError):
    """Invalid parameters or experiment configuration."""


class NonConvergenceError(RandresError, ArithmeticError):
    """An integral estimate did not reach the requested accuracy."""


class SingularSystemError(RandresError, ArithmeticError):
    """A linear system could not be solved to the requested accuracy."""


class InsufficientWarmupError(RandresError, ValueError):
    """An input sequence is too short to flush the reservoir state."""


class SupportMismatchError(RandresError, ValueError):
    """Sampled hidden weights fall outside the support of the density."""
