"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: usage-type errors exit with 2,
numerical ones (domain, conditioning) with 3.
"""


class ToolkitError(Exception):
    """Base class for every error raised by linpert."""


class ArgumentError(ToolkitError, ValueError):
    """An argument is outside the range an operation accepts."""


class ShapeError(ArgumentError):
    """Array or map dimensions do not chain."""


class CatalogError(ArgumentError):
    """Unknown catalog entry."""


class PredicateError(ArgumentError):
    """A theorem hypothesis required by a verifier does not hold."""


class RegularityError(ArgumentError):
    """A derivative of higher order than the map's declared class was requested."""


class ConfigError(ArgumentError):
    """Malformed or unknown configuration key."""


class NumericalError(ToolkitError):
    """Base for failures of the numerics themselves."""


class DomainError(NumericalError):
    """Evaluation outside a map's domain, or a non-finite value."""


class ConditioningError(NumericalError):
    """A pivot block is too ill-conditioned to trust."""
