"""Exception types shared across the package."""


class CodedCacheError(Exception):
    """Base class for all library errors."""


class ValidationError(CodedCacheError, ValueError):
    """Invalid configuration, index, demand, message, or schedule."""


class UnsupportedConfigError(ValidationError):
    """Operation is only defined for a specific configuration."""


class LimitExceededError(CodedCacheError, RuntimeError):
    """A configured resource limit was exceeded."""


class BudgetExceededError(LimitExceededError):
    """Schedule search budget exhausted before a solution was found."""
