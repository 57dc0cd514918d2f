class ContractViolation(ValueError):
    """An operation was called with arguments outside its contract."""


class ConfigurationError(ValueError):
    """Invalid run or hyperparameter configuration."""


class RegimeError(ConfigurationError):
    """Target accuracy outside the admissible regime ``eps <= L**2 / rho``."""


class DegenerateProblemError(ConfigurationError):
    """The start point is already at or below the declared lower bound."""


class RunAborted(RuntimeError):
    """A parallel worker failed; the partial trace is attached."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
