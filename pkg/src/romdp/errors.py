"""Exception types shared across the package."""


class DegenerateDistributionError(ValueError):
    """All probability mass vanished (every log score is -inf)."""


class ConvergenceError(RuntimeError):
    """Iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class ConsistencyError(RuntimeError):
    """An internal invariant was violated (e.g. the variational objective rose)."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
