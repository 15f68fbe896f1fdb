"""Exception types shared across the package."""


class DomainError(ValueError):
    """Invalid quantum numbers, dimensions or other out-of-domain input."""


class PreconditionError(ValueError):
    """A documented precondition (e.g. injectivity on the window) does not hold."""


class ChargeError(ValueError):
    """A tensor does not respect the U(1) charge assignment it was given."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class ConsistencyError(RuntimeError):
    """An internal numerical self-check failed."""
