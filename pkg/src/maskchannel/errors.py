"""Exception hierarchy for maskchannel.

All library errors derive from :class:`MaskChannelError` so callers can
catch the whole family with one clause.  Validation failures additionally
subclass ``ValueError`` to stay friendly to generic callers.
"""


class MaskChannelError(Exception):
    """Base class for all maskchannel errors."""


class InvalidArgumentError(MaskChannelError, ValueError):
    """An argument violated a documented precondition."""


class DegenerateInteractionError(MaskChannelError, ValueError):
    """Interaction matrix has zero quadratic power and cannot be calibrated."""


class EnumerationCapError(MaskChannelError):
    """Exhaustive search would exceed the configured enumeration cap."""
