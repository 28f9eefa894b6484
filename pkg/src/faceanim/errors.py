"""Exception types shared across the package."""


class FaceAnimError(Exception):
    """Base class for all package errors."""


class ValidationError(FaceAnimError):
    """Input violates a documented precondition."""


class AttributeCSVError(FaceAnimError):
    """Attribute CSV is malformed (missing column, bad cell, ...)."""


class ExtractionError(FaceAnimError):
    """The oracle could not find a sprite face in the image."""


class ManifestError(FaceAnimError):
    """Dataset manifest is missing, inconsistent, or unsupported."""


class CheckpointError(FaceAnimError):
    """Checkpoint file is unreadable or incompatible with the model config."""
