"""Exception hierarchy shared by all persview modules.

Two branches matter to callers: ``ValidationError`` means the inputs were
rejected before any work was done (bad dimensions, broken bundle members,
out-of-range parameters), ``ProcessingError`` means a computation failed on
inputs that passed validation. The CLI maps them to exit codes 2 and 3.
"""


class PersviewError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PersviewError):
    """Input rejected before processing started."""


class ProcessingError(PersviewError):
    """Computation failed on inputs that passed validation."""


class NonPositiveDepth(ProcessingError):
    """A point's camera-space depth fell at or below the epsilon guard."""


class NonPositiveDistance(ValidationError):
    """Camera distance must be strictly positive."""


class EyesBehindCamera(ValidationError):
    """Focal reparametrization would place the eye plane behind the camera."""


class BadKernel(ValidationError):
    """Filter kernel must be odd and positive."""


class DegenerateDepth(ValidationError):
    """Depth map has no 2x2 block of valid pixels, so no mesh can be built."""


class EmptyMesh(ProcessingError):
    """No renderable faces remain after culling."""


class DimensionMismatch(ValidationError):
    """Array shapes disagree where they must match."""

    def __init__(self, member: str, message: str = ""):
        self.member = member
        super().__init__(message or f"dimension mismatch: {member}")


class TooSmall(ValidationError):
    """Image too small for the requested operation."""


class DegenerateLandmarks(ValidationError):
    """Landmark set has zero spread and cannot be normalized."""


class DivergedFit(ProcessingError):
    """Optimization loss became non-finite."""


class ZeroVector(ValidationError):
    """Feature vector has zero norm."""


class LengthMismatch(ValidationError):
    """Feature vectors differ in length."""


class EmptyMask(ValidationError):
    """Mask selects no pixels."""


class EmptyReport(ValidationError):
    """No metric rows to aggregate."""


class MissingManifest(ValidationError):
    """Bundle directory has no manifest.json."""


class CorruptMember(ValidationError):
    """A bundle member file exists but cannot be parsed."""

    def __init__(self, member: str, message: str = ""):
        self.member = member
        super().__init__(message or f"corrupt bundle member: {member}")


class MissingGenerated(ValidationError):
    """Blending was requested but the bundle has no generated image."""


class IoFailure(ProcessingError):
    """Filesystem write failed."""
