"""Exception types shared across the package.

The split mirrors the CLI exit-code convention: configuration problems,
data problems, and estimation problems are distinguishable by type.
"""


class CausalPoolError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(CausalPoolError, ValueError):
    """Invalid specification, hyperparameters, or run configuration."""


class DataError(CausalPoolError, ValueError):
    """Invalid or degenerate input data."""


class EstimationError(CausalPoolError, RuntimeError):
    """Estimation pipeline failed (singular design, broken invariant, ...)."""


class TaskError(CausalPoolError, RuntimeError):
    """A submitted task failed; carries the index of the first failure."""

    def __init__(self, task_index: int, message: str):
        super().__init__(f"task {task_index} failed: {message}")
        self.task_index = task_index
