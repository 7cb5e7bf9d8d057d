"""Exception types shared across the package.

Every error raised by the public API is a subclass of :class:`DeeptileError`,
so callers (notably the CLI) can separate expected failures from bugs.
"""


class DeeptileError(Exception):
    """Base class for all errors raised by deeptile."""


class ImageIOError(DeeptileError):
    """Unreadable, unsupported, or non-RGB image data at an I/O boundary."""


class NonFiniteError(DeeptileError):
    """NaN or infinity encountered where finite values are required."""


class GeometryError(DeeptileError):
    """Inconsistent tile/canvas/hole geometry."""


class WeightFormatError(DeeptileError):
    """Malformed or incomplete network weight file."""


class OptimizationError(DeeptileError):
    """Optimization aborted (e.g. the loss became non-finite)."""
