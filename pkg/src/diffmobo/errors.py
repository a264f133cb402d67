"""Exception types shared across the package.

Each error maps to a distinct failure mode of the public API so callers
(and the HTTP layer) can tell misuse apart from numerical breakdown.
"""


class DiffmoboError(Exception):
    """Base class for all package errors."""


class UnsupportedProblemError(DiffmoboError, ValueError):
    """Requested benchmark name is not in the registry."""


class InvalidDimensionError(DiffmoboError, ValueError):
    """Decision-space dimension too small for the requested problem family."""


class BoundsViolationError(DiffmoboError, ValueError):
    """A decision vector lies outside the problem's box bounds."""


class InvalidArgumentError(DiffmoboError, ValueError):
    """An argument violates an operation's precondition."""


class InvalidDataError(DiffmoboError, ValueError):
    """Input data is empty, non-finite, or otherwise unusable."""


class IllConditionedError(DiffmoboError, RuntimeError):
    """Kernel matrix stayed non-positive-definite after jitter escalation."""


class InvalidStateError(DiffmoboError, RuntimeError):
    """An operation was invoked on an object in an unusable state."""


class UnsupportedDimensionError(DiffmoboError, ValueError):
    """Exact hypervolume requested for more objectives than supported."""


class ConfigError(DiffmoboError, ValueError):
    """Experiment configuration document failed to parse or validate."""


class HistoryAlignmentError(DiffmoboError, ValueError):
    """History files cannot be aligned on a common evaluation grid."""
