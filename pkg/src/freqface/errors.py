"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Tensor or image shapes are incompatible with the requested operation."""


class NumericError(ArithmeticError):
    """A computation produced NaN or Inf from finite inputs."""


class UsageError(ValueError):
    """An API precondition was violated (bad argument, wrong call order)."""


class TrainingDiverged(RuntimeError):
    """The training loss became non-finite; a diagnostic checkpoint was written."""
