"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: ValidationError -> 1, OSError -> 2,
MissingDependencyError -> 3.
"""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class MissingDependencyError(RuntimeError):
    """A required upstream artifact or component is absent (e.g. an
    untrained vocoder, a missing cache produced by an earlier stage)."""
