"""Exception hierarchy shared by all submodules."""


class SemrelayError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(SemrelayError, ValueError):
    """A physical or model parameter is outside its valid range."""


class OutOfWindowError(SemrelayError, ValueError):
    """A time instant or window lies outside the interval where a quantity is defined."""


class AlreadyInRangeError(SemrelayError, ValueError):
    """A relay is already inside the target's communication radius at the epoch."""


class DivergentMomentError(InvalidParameterError):
    """A fading moment was requested whose gamma arguments are non-positive."""


class NonconvergentQuadratureError(SemrelayError, RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class EmptyResultError(SemrelayError, ValueError):
    """An operation produced an empty selection or sample where one is required."""


class ShapeMismatchError(SemrelayError, ValueError):
    """An assignment does not match the vehicle count or unit count it is used with."""


class StateSpaceTooLargeError(SemrelayError, ValueError):
    """Exact enumeration was requested on a state space beyond the supported size."""


class ConfigError(SemrelayError, ValueError):
    """A configuration document failed to parse or validate.

    ``field`` holds the dotted path of the offending entry, when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class TraceError(SemrelayError, ValueError):
    """A mobility trace is malformed, non-monotone, discontinuous or too short."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
