"""Exception hierarchy shared by all modules."""


class GPSignalError(Exception):
    """Base class for every error raised by this package."""


class ParseError(GPSignalError, ValueError):
    """A file or S-expression could not be parsed."""


class ValidationError(GPSignalError, ValueError):
    """A road network violates a structural invariant."""


class RouteError(GPSignalError, ValueError):
    """A flow route is not a contiguous legal path through the network."""


class GeometryError(GPSignalError, ValueError):
    """An intersection lacks one of the four compass approaches."""


class MissingChoice(GPSignalError, KeyError):
    """A signalized intersection received no phase choice for a step."""


class PhaseMismatch(GPSignalError, ValueError):
    """A phase does not belong to the queried intersection."""


class ConfigError(GPSignalError, ValueError):
    """Invalid controller or experiment configuration."""


class DomainError(GPSignalError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class EmptyInput(GPSignalError, ValueError):
    """An operation that needs at least one item received none."""
