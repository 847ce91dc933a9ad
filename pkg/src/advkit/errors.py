"""Exception hierarchy shared across the package."""


class AdvkitError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(AdvkitError):
    """Tensor shapes are incompatible with the requested operation."""


class FormatError(AdvkitError):
    """A file (model manifest, weight blob, image) is malformed."""


class ModelValidationError(AdvkitError):
    """A loaded model violates a structural invariant."""


class DegenerateImageError(AdvkitError):
    """An image has zero variance, so correlation is undefined."""


class AlreadyTargetClassError(AdvkitError):
    """The clean image is already classified as the requested target."""


class IoError(AdvkitError):
    """Filesystem write failed."""
