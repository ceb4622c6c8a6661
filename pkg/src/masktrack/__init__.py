"""Mask-track collection, filtering, storage, evaluation and review tooling."""

from .config import PipelineConfig
from .errors import (
    BackendUnavailableError,
    BadMagicError,
    ClipBusyError,
    DimensionMismatchError,
    EmptyMaskError,
    FlowUnavailableError,
    FrameOutOfRangeError,
    FrameRangeMismatchError,
    MalformedRleError,
    MaskTrackError,
    NoCandidateError,
    NonFiniteValueError,
    OverlapInVosModeError,
    ProtocolError,
    SchemaViolationError,
    TrackLostError,
    TruncatedFileError,
    UnknownTrackError,
    UnsatisfiableParamsError,
    VersionUnsupportedError,
)
from .flow import FlowField, read_flow, warp_mask, warp_points, write_flow
from .mask import boundary_f_score, iou, rle_decode, rle_encode
from .metrics import dataset_stats, eval_manifest, eval_track_jf
from .pipeline import collect_clip, filter_tracks, init_seed_masks, propagate_track_step
from .sampling import Point, sample_points
from .segmenter import (
    CandidateMask,
    OracleSegmenter,
    PointPrompt,
    RemoteConfig,
    RemoteSegmenter,
    Segmenter,
)
from .store import load_manifest, save_manifest, splice_refined_mask, validate_manifest
from .synthworld import SyntheticScene, generate_clip, load_scene, materialize_scene

__version__ = "0.1.0"

__all__ = [
    "BackendUnavailableError",
    "BadMagicError",
    "CandidateMask",
    "ClipBusyError",
    "DimensionMismatchError",
    "EmptyMaskError",
    "FlowField",
    "FlowUnavailableError",
    "FrameOutOfRangeError",
    "FrameRangeMismatchError",
    "MalformedRleError",
    "MaskTrackError",
    "NoCandidateError",
    "NonFiniteValueError",
    "OracleSegmenter",
    "OverlapInVosModeError",
    "PipelineConfig",
    "Point",
    "PointPrompt",
    "ProtocolError",
    "RemoteConfig",
    "RemoteSegmenter",
    "SchemaViolationError",
    "Segmenter",
    "SyntheticScene",
    "TrackLostError",
    "TruncatedFileError",
    "UnknownTrackError",
    "UnsatisfiableParamsError",
    "VersionUnsupportedError",
    "boundary_f_score",
    "collect_clip",
    "dataset_stats",
    "eval_manifest",
    "eval_track_jf",
    "filter_tracks",
    "generate_clip",
    "init_seed_masks",
    "iou",
    "load_manifest",
    "load_scene",
    "materialize_scene",
    "propagate_track_step",
    "read_flow",
    "rle_decode",
    "rle_encode",
    "sample_points",
    "save_manifest",
    "splice_refined_mask",
    "validate_manifest",
    "warp_mask",
    "warp_points",
    "write_flow",
]
