"""Exception types shared across the package."""


class VmaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidGeometry(VmaError):
    """Geometry input violates a construction or operation precondition."""


class FrameMismatch(VmaError):
    """Two maps expected in the same coordinate frame are not."""


class EmptyTrajectory(VmaError):
    """Trajectory operations need at least one pose."""


class EmptyGroundTruth(VmaError):
    """Instance metrics need a non-empty ground-truth side."""


class InternalGeometryError(VmaError):
    """A geometric invariant the pipeline relies on was broken internally."""


class SchemaError(VmaError):
    """A JSON document does not match the expected schema."""
