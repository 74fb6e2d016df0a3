"""Exception hierarchy.

Every error raised on purpose by the package derives from ``CurlGroundError``.
The CLI maps the subclasses onto exit codes (see ``curlground.cli``).
"""


class CurlGroundError(Exception):
    """Base class for all package errors."""


class InvalidArgument(CurlGroundError, ValueError):
    pass


class NumericFailure(CurlGroundError, RuntimeError):
    """An iterative method did not reach its tolerance.

    ``residual`` and ``last_iterate`` carry whatever the solver had when it
    gave up, so callers can inspect or restart from it.
    """

    def __init__(self, message, residual=None, last_iterate=None):
        super().__init__(message)
        self.residual = residual
        self.last_iterate = last_iterate


class ResolutionError(NumericFailure):
    """A profile is too concentrated for the grid it lives on."""


class NoFiberMax(CurlGroundError):
    """J has no positive maximum on the half-space R+ w + E^-."""


class HypothesisViolation(CurlGroundError):
    """A hypothesis of the existence theory fails for the given input."""


class ConditionVViolated(HypothesisViolation):
    def __init__(self, message, eigenvalue=None, zero_tol=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue
        self.zero_tol = zero_tol


class RegimeError(HypothesisViolation):
    """The exponent p is outside the range covered for this potential."""


class ConfigError(CurlGroundError, ValueError):
    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
