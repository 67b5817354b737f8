class UnsupportedConfiguration(ValueError):
    """Operation is only defined for a restricted metric or lattice setup."""


class DomainError(ValueError):
    """Argument lies outside the mathematical domain of a scalar function."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, **state):
        super().__init__(message)
        self.state = state
