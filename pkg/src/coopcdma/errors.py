class NumericDegenerateError(ArithmeticError):
    """A recursion or solve hit a singular or non-finite state."""


class InvalidStateError(RuntimeError):
    """An operation was called before its inputs were available."""


class ConfigError(ValueError):
    """Invalid simulation configuration; ``key`` names the offending field."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class DegenerateAllocationWarning(RuntimeWarning):
    """Allocation fell back to equal power because the cross-correlation was zero."""
