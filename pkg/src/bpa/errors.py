"""Exception types raised across the package."""


class BPAError(ValueError):
    """Base class for input-validation and degeneracy failures."""


class DegenerateError(BPAError):
    """The requested estimate is not unique (collinear points, great-circle mode, ...)."""


class ZeroVectorError(BPAError):
    pass


class OutOfRangeError(BPAError):
    pass


class InvalidFrameError(BPAError):
    pass


class EmptyClassError(BPAError):
    """A scene point's class (edge / surface) has no model counterpart."""
