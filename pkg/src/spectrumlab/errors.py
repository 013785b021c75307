"""Exception types shared across the platform layers."""


class SpectrumLabError(Exception):
    """Base class for all platform errors."""

    code = "error"


class InvalidArgument(SpectrumLabError, ValueError):
    code = "invalid-argument"


class PermissionDenied(SpectrumLabError):
    code = "permission-denied"


class NotFound(SpectrumLabError):
    code = "not-found"


class Unavailable(SpectrumLabError):
    code = "unavailable"


class NoSuchView(SpectrumLabError):
    """Requested aggregation level was never precomputed."""

    code = "no-such-view"


class OutOfRetention(SpectrumLabError):
    """Offset points at data the queue has already expired."""

    code = "out-of-retention"


class StateError(SpectrumLabError):
    """Illegal state transition (e.g. restarting a stopped campaign)."""

    code = "state-error"
