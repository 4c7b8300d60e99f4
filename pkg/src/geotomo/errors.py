"""Exception types shared across the package."""


class GeotomoError(Exception):
    """Base class for all package errors."""


class DomainError(GeotomoError):
    """A point or parameter lies outside its admissible domain."""


class TrappingError(GeotomoError):
    """A geodesic failed to exit within the step budget (non-simple metric)."""


class SimplicityError(GeotomoError):
    """A simplicity witness (convexity or Jacobi-field sign) failed."""


class GridMismatchError(GeotomoError):
    """Two fields do not live on the same grid."""


class DecompositionError(GeotomoError):
    """An elliptic solve / decomposition did not meet its residual contract."""


class InputError(GeotomoError):
    """Malformed configuration or data file."""
