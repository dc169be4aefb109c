"""Exception types shared across the package."""


class MrfError(Exception):
    """Base class for package errors."""


class DomainError(MrfError, ValueError):
    """A value lies outside its declared interval."""


class ShapeError(MrfError, ValueError):
    """Array shapes or node counts do not agree."""


class ConfigError(MrfError, ValueError):
    """Invalid or inconsistent configuration."""


class NumericError(MrfError, ArithmeticError):
    """A computation produced non-finite values."""


class CapabilityError(MrfError):
    """Requested computation is outside what this implementation supports."""
