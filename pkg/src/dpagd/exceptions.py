"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A numeric or configuration argument is outside its allowed range."""


class DimensionMismatchError(ValueError):
    """Weight vector and feature matrix shapes disagree."""


class DataError(ValueError):
    """Input data could not be parsed or is degenerate.

    ``line`` is the 1-based source line when the problem is tied to one.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrainerError(RuntimeError):
    """A training routine failed (divergence, infeasible calibration)."""
