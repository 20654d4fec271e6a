"""Exception types shared across modules."""


class DomainError(ValueError):
    """An argument lies outside the region where a formula is defined."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to certify its result within its budget."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class NotATreeError(ValueError):
    """A construction that needs an acyclic ball was given a ball with a cycle."""


class InsufficientSamplesError(ValueError):
    """A statistical test was asked to run on too few independent samples."""
