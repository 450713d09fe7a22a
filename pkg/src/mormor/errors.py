"""Exception types shared across the toolkit."""


class ContractViolation(ValueError):
    """An operation was called with inputs that break its preconditions."""


class SolverError(RuntimeError):
    """A high- or reduced-fidelity solve failed.

    Carries the offending parameter so experiment drivers can report it.
    """

    def __init__(self, message, parameter=None):
        super().__init__(message)
        self.parameter = parameter


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""
