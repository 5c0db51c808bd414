"""Exception types shared across the package."""


class CodedCachingError(Exception):
    """Base class for every error raised by this package."""


class InputError(CodedCachingError, ValueError):
    """An argument violates an operation's precondition."""


class InvalidInstanceError(CodedCachingError):
    """A problem instance failed structural validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid instance: " + "; ".join(self.violations))


class MalformedTreeError(CodedCachingError):
    """The node/parent structure is not a directed in-tree."""


class SaturationError(CodedCachingError):
    """The instance already attains L = alpha * min(beta, K)."""


class SearchLimitError(CodedCachingError):
    """An exhaustive search request exceeds the enforced size limits."""


class SaturationNotFoundError(CodedCachingError):
    """No file count within the search limit saturates the parameters."""

    def __init__(self, message, max_bound_seen):
        self.max_bound_seen = max_bound_seen
        super().__init__(message)


class InfeasibleError(CodedCachingError):
    """Parameters violate a feasibility requirement (e.g. K*M < N)."""
