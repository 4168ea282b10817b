"""Exception hierarchy shared by every module."""


class ArklError(Exception):
    """Base class for all errors raised by :mod:`arkl`."""


class InvalidParam(ArklError, ValueError):
    """A constructor or operation received an out-of-range argument."""


class ZeroProbability(ArklError):
    """A conditional probability along an observed trajectory is zero."""


class SupportViolation(ArklError):
    """The first law puts mass where the second law has none."""


class CapExceeded(ArklError):
    """Exact enumeration would exceed the configured state cap."""


class Unbounded(ArklError):
    """A log-density ratio is infinite because supports do not match."""
