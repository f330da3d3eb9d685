"""Exception hierarchy shared by every module."""


class GlmEquivError(Exception):
    """Base class for all package errors."""


class DomainError(GlmEquivError, ValueError):
    """An argument lies outside the domain of the requested map."""


class ConfigError(GlmEquivError, ValueError):
    """Invalid configuration or experiment parameters."""


class ShapeError(GlmEquivError, ValueError):
    """Grid sizes or array lengths do not match."""


class InvariantError(GlmEquivError, ValueError):
    """A constructed object violates one of its structural invariants."""


class NumericalError(GlmEquivError, ArithmeticError):
    """A computation became numerically unreliable."""
