"""Exception hierarchy shared by every module.

Each class maps to one error kind; the CLI turns them into exit codes.
"""


class GTSVRGError(Exception):
    """Base class for all package errors."""


class ConfigError(GTSVRGError, ValueError):
    """Invalid parameters or configuration."""


class UsageError(GTSVRGError, ValueError):
    """Bad arguments to an API call (index out of range, shape mismatch)."""


class TopologyError(GTSVRGError):
    """Graph or mixing matrix violates connectivity / stochasticity."""


class NumericError(GTSVRGError, ArithmeticError):
    """Non-finite inputs or a numerical routine failed to converge."""


class DivergedError(NumericError):
    """An iteration produced non-finite values."""

    def __init__(self, message, *, alpha=None, t=None, k=None, bound=None):
        super().__init__(message)
        self.alpha = alpha
        self.t = t
        self.k = k
        self.bound = bound


class PreconditionError(GTSVRGError, ValueError):
    """A mathematical precondition (e.g. rho(G) < 1) does not hold."""


class InternalError(GTSVRGError, RuntimeError):
    """An invariant that construction should guarantee was broken."""
