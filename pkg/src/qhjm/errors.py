"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ValidationError -> 2,
NumericalError -> 3. Everything else is a genuine bug.
"""


class QhjmError(Exception):
    """Base class for all package errors."""


class ValidationError(QhjmError):
    """Input violates a documented precondition or invariant."""


class NumericalError(QhjmError):
    """An iterative numerical procedure failed to converge."""


class DegenerateProjectionError(NumericalError):
    """Register projection hit a ~zero-probability subspace.

    Usually means the target bitstring does not match any eigenphase
    passed by the phase-estimation filter.
    """


class AmbiguityError(QhjmError):
    """Two independent random starts disagree: the bit resolution cannot
    separate the leading eigenvalue from its neighbours."""
