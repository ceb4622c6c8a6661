"""Exception hierarchy shared across the package.

Every error carries a stable machine-readable ``code`` so CLI output and HTTP
responses can expose the failure class without parsing prose.
"""

from __future__ import annotations


class MaskTrackError(Exception):
    """Base class for all package errors."""

    code = "ERROR"


class DimensionMismatchError(MaskTrackError):
    code = "DIMENSION_MISMATCH"


class MalformedRleError(MaskTrackError):
    code = "MALFORMED_RLE"


class EmptyMaskError(MaskTrackError):
    code = "EMPTY_MASK"


class BadMagicError(MaskTrackError):
    code = "BAD_MAGIC"


class TruncatedFileError(MaskTrackError):
    code = "TRUNCATED_FILE"


class NonFiniteValueError(MaskTrackError):
    code = "NONFINITE_VALUE"


class NoCandidateError(MaskTrackError):
    code = "NO_CANDIDATE"


class BackendUnavailableError(MaskTrackError):
    code = "BACKEND_UNAVAILABLE"


class ProtocolError(MaskTrackError):
    code = "PROTOCOL_ERROR"


class UnsatisfiableParamsError(MaskTrackError):
    code = "UNSATISFIABLE_PARAMS"


class TrackLostError(MaskTrackError):
    code = "TRACK_LOST"


class FlowUnavailableError(MaskTrackError):
    code = "FLOW_UNAVAILABLE"


class FrameRangeMismatchError(MaskTrackError):
    code = "FRAME_RANGE_MISMATCH"


class OverlapInVosModeError(MaskTrackError):
    code = "OVERLAP_IN_VOS_MODE"


class SchemaViolationError(MaskTrackError):
    """Manifest schema failure with a JSON-pointer-style location."""

    code = "SCHEMA_VIOLATION"

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(message)
        self.pointer = pointer

    def __str__(self) -> str:
        base = super().__str__()
        if self.pointer:
            return f"{base} (at {self.pointer})"
        return base


class VersionUnsupportedError(MaskTrackError):
    code = "VERSION_UNSUPPORTED"


class UnknownTrackError(MaskTrackError):
    code = "UNKNOWN_TRACK"


class FrameOutOfRangeError(MaskTrackError):
    code = "FRAME_OUT_OF_RANGE"


class ClipBusyError(MaskTrackError):
    code = "CLIP_BUSY"
