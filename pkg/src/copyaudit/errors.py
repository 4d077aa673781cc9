"""Exception hierarchy shared by all copyaudit modules."""


class CopyAuditError(Exception):
    """Base class for every error raised by this package."""


class MalformedFile(CopyAuditError):
    """Input bytes are not a well-formed image file."""


class UnsupportedFormat(CopyAuditError):
    """Image file is valid but uses an unsupported encoding (e.g. 16-bit)."""


class InvalidThreshold(CopyAuditError):
    """Mask threshold outside [0, 1]."""


class DimensionMismatch(CopyAuditError):
    """Two operands that must share dimensions do not."""


class InvalidParameter(CopyAuditError):
    """Numeric parameter outside its allowed range."""


class ImageTooSmall(CopyAuditError):
    """Image smaller than the metric's window/patch size."""


class InsufficientSamples(CopyAuditError):
    """Fewer samples than the estimator requires."""


class NumericalFailure(CopyAuditError):
    """A numerical routine (eigendecomposition) failed to converge."""


class OutOfRange(CopyAuditError):
    """Metric value outside its defined domain."""


class ProtocolError(CopyAuditError):
    """Backend returned a malformed or contract-violating response."""


class BackendTimeout(CopyAuditError):
    """A single backend request timed out."""


class BackendUnavailable(CopyAuditError):
    """Backend kept failing after all retries were exhausted."""


class PipelineError(CopyAuditError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage


class ManifestError(CopyAuditError):
    """Batch manifest unreadable or malformed."""
