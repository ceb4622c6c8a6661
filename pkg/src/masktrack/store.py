"""Clip manifest persistence, schema validation, and review mutations.

Manifests are JSON files (extension ``.mug.json``) carrying the clip's
frames, the collection config snapshot, every track with run-length masks
and step IoUs, and an append-only audit log. Nothing here ever deletes a
track or an audit event; curation and review only flip statuses.

Writers must hold the advisory lock (``<path>.lock``) around
read-modify-write cycles; readers need nothing.
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from .config import PipelineConfig
from .errors import (
    ClipBusyError,
    DimensionMismatchError,
    FlowUnavailableError,
    FrameOutOfRangeError,
    SchemaViolationError,
    UnknownTrackError,
    VersionUnsupportedError,
)
from .flow import FlowField, warp_mask
from .mask import as_mask, iou, rle_decode, rle_encode

SCHEMA_VERSION = 1
EPOCH_TS = "1970-01-01T00:00:00Z"
COLLECTED_MANIFEST = "clip.mug.json"
GT_MANIFEST = "gt.mug.json"

_STATUSES = {"auto", "accepted", "rejected"}
_SOURCES = {"auto", "refined"}
_ACTIONS = {"created", "filtered", "accepted", "rejected", "refined"}
_FLOW_SOURCES = {"exact", "files", "none"}
_TOP_REQUIRED = {"schema_version", "clip_id", "dims", "frames", "config", "flow_source", "tracks", "audit"}
_TOP_OPTIONAL = {"filter_gamma"}
_ENTRY_KEYS = {"frame_index", "mask", "step_iou", "source", "resample"}


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def new_audit_event(
    actor: str, action: str, payload: Dict[str, Any], timestamp: Optional[str] = None
) -> Dict[str, Any]:
    if action not in _ACTIONS:
        raise ValueError(f"unknown audit action {action!r}")
    return {
        "timestamp": timestamp if timestamp is not None else utc_timestamp(),
        "actor": actor,
        "action": action,
        "payload": payload,
    }


def _fail(pointer: str, message: str) -> None:
    raise SchemaViolationError(message, pointer)


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate_manifest(manifest: Any) -> None:
    """Check the full manifest schema.

    Raises:
        SchemaViolationError: structural problems, with a JSON-pointer-style
            path to the offending field.
        VersionUnsupportedError: a well-formed but unknown schema_version.
    """
    if not isinstance(manifest, dict):
        _fail("", f"manifest must be an object, got {type(manifest).__name__}")
    version = manifest.get("schema_version")
    if not _is_int(version):
        _fail("/schema_version", f"schema_version must be an integer, got {version!r}")
    if version != SCHEMA_VERSION:
        raise VersionUnsupportedError(f"schema_version {version} not supported (expected {SCHEMA_VERSION})")
    unknown = set(manifest) - _TOP_REQUIRED - _TOP_OPTIONAL
    if unknown:
        _fail(f"/{sorted(unknown)[0]}", "unknown manifest field")
    missing = _TOP_REQUIRED - set(manifest)
    if missing:
        _fail(f"/{sorted(missing)[0]}", "required manifest field missing")

    if not isinstance(manifest["clip_id"], str) or not manifest["clip_id"]:
        _fail("/clip_id", "clip_id must be a non-empty string")
    dims = manifest["dims"]
    if (
        not isinstance(dims, list)
        or len(dims) != 2
        or not all(_is_int(v) and v >= 1 for v in dims)
    ):
        _fail("/dims", f"dims must be [H, W] positive integers, got {dims!r}")
    h, w = dims
    frames = manifest["frames"]
    if not isinstance(frames, list) or not frames or not all(isinstance(f, str) and f for f in frames):
        _fail("/frames", "frames must be a non-empty list of frame refs")
    try:
        PipelineConfig.from_dict(manifest["config"])
    except (ValueError, TypeError) as exc:
        _fail("/config", f"config does not parse: {exc}")
    if manifest["flow_source"] not in _FLOW_SOURCES:
        _fail("/flow_source", f"flow_source must be one of {sorted(_FLOW_SOURCES)}")
    if "filter_gamma" in manifest:
        fg = manifest["filter_gamma"]
        if not _is_number(fg) or not 0.0 <= fg <= 1.0:
            _fail("/filter_gamma", f"filter_gamma must be a number in [0, 1], got {fg!r}")

    tracks = manifest["tracks"]
    if not isinstance(tracks, list):
        _fail("/tracks", "tracks must be a list")
    seen_ids = set()
    for i, track in enumerate(tracks):
        base = f"/tracks/{i}"
        if not isinstance(track, dict):
            _fail(base, "track must be an object")
        if set(track) != {"track_id", "status", "frames"}:
            _fail(base, f"track must have exactly track_id, status, frames; got {sorted(track)}")
        tid = track["track_id"]
        if not isinstance(tid, str) or not tid:
            _fail(f"{base}/track_id", "track_id must be a non-empty string")
        if tid in seen_ids:
            _fail(f"{base}/track_id", f"duplicate track_id {tid!r}")
        seen_ids.add(tid)
        if track["status"] not in _STATUSES:
            _fail(f"{base}/status", f"status must be one of {sorted(_STATUSES)}")
        entries = track["frames"]
        if not isinstance(entries, list) or not entries:
            _fail(f"{base}/frames", "track frames must be a non-empty list")
        start = None
        for j, entry in enumerate(entries):
            ep = f"{base}/frames/{j}"
            if not isinstance(entry, dict):
                _fail(ep, "entry must be an object")
            unknown_entry = set(entry) - _ENTRY_KEYS
            if unknown_entry:
                _fail(f"{ep}/{sorted(unknown_entry)[0]}", "unknown entry field")
            for req in ("frame_index", "mask", "source"):
                if req not in entry:
                    _fail(f"{ep}/{req}", "required entry field missing")
            t = entry["frame_index"]
            if not _is_int(t) or not 1 <= t <= len(frames):
                _fail(f"{ep}/frame_index", f"frame_index must be in 1..{len(frames)}, got {t!r}")
            if j == 0:
                start = t
            elif t != start + j:
                _fail(f"{ep}/frame_index", f"track frames must be consecutive, expected {start + j} got {t}")
            try:
                decoded = rle_decode(entry["mask"])
            except Exception as exc:
                _fail(f"{ep}/mask", f"mask does not decode: {exc}")
            if decoded.shape != (h, w):
                _fail(f"{ep}/mask", f"mask size {list(decoded.shape)} does not match clip dims [{h}, {w}]")
            if j == 0:
                if "step_iou" in entry:
                    _fail(f"{ep}/step_iou", "step_iou must be absent on a track's first frame")
                if "resample" in entry:
                    _fail(f"{ep}/resample", "resample must be absent on a track's first frame")
            else:
                if "step_iou" not in entry:
                    _fail(f"{ep}/step_iou", "step_iou required from the second frame on")
                s = entry["step_iou"]
                if not _is_number(s) or not 0.0 <= s <= 1.0:
                    _fail(f"{ep}/step_iou", f"step_iou must be a number in [0, 1], got {s!r}")
                if "resample" in entry and not isinstance(entry["resample"], bool):
                    _fail(f"{ep}/resample", "resample must be a boolean")
            if entry["source"] not in _SOURCES:
                _fail(f"{ep}/source", f"source must be one of {sorted(_SOURCES)}")

    audit = manifest["audit"]
    if not isinstance(audit, list):
        _fail("/audit", "audit must be a list")
    for k, event in enumerate(audit):
        ap = f"/audit/{k}"
        if not isinstance(event, dict) or set(event) != {"timestamp", "actor", "action", "payload"}:
            _fail(ap, "audit event must have exactly timestamp, actor, action, payload")
        if not isinstance(event["timestamp"], str) or not event["timestamp"]:
            _fail(f"{ap}/timestamp", "timestamp must be a non-empty string")
        if not isinstance(event["actor"], str) or not event["actor"]:
            _fail(f"{ap}/actor", "actor must be a non-empty string")
        if event["action"] not in _ACTIONS:
            _fail(f"{ap}/action", f"action must be one of {sorted(_ACTIONS)}")
        if not isinstance(event["payload"], dict):
            _fail(f"{ap}/payload", "payload must be an object")


def load_manifest(path) -> Dict[str, Any]:
    """Parse and validate a manifest file."""
    try:
        manifest = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolationError(f"{path} is not valid JSON: {exc}", "")
    validate_manifest(manifest)
    return manifest


def save_manifest(manifest: Dict[str, Any], path) -> None:
    """Validate, then write atomically (temp file in place, then rename)."""
    validate_manifest(manifest)
    target = Path(path)
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2) + "\n")
    os.replace(tmp, target)


@contextmanager
def manifest_lock(path):
    """Advisory writer lock: ``<path>.lock`` created exclusively.

    Raises:
        ClipBusyError: another writer holds the lock.
    """
    lock_path = Path(str(path) + ".lock")
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ClipBusyError(f"another writer holds {lock_path}")
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        yield
    finally:
        try:
            os.unlink(lock_path)
        except FileNotFoundError:
            pass


def get_track(manifest: Dict[str, Any], track_id: str) -> Dict[str, Any]:
    for track in manifest["tracks"]:
        if track["track_id"] == track_id:
            return track
    raise UnknownTrackError(f"no track {track_id!r} in clip {manifest.get('clip_id')!r}")


def track_masks(track: Dict[str, Any]) -> Dict[int, np.ndarray]:
    """Decode a track record into a frame-index-to-mask mapping."""
    return {e["frame_index"]: rle_decode(e["mask"]) for e in track["frames"]}


def set_track_status(
    manifest: Dict[str, Any],
    track_id: str,
    status: str,
    actor: str,
    timestamp: Optional[str] = None,
) -> Dict[str, Any]:
    """Accept or reject a track, auditing the change.

    Setting the status a track already has is a no-op (no audit event), so
    retried requests do not inflate the log. Overrides in both directions
    are allowed and each direction is audited.

    Raises:
        UnknownTrackError: no such track.
    """
    if status not in ("accepted", "rejected"):
        raise ValueError(f"status must be 'accepted' or 'rejected', got {status!r}")
    track = get_track(manifest, track_id)
    if track["status"] != status:
        track["status"] = status
        manifest["audit"].append(
            new_audit_event(actor, status, {"track_id": track_id}, timestamp)
        )
    return manifest


def _recompute_step_iou(
    manifest: Dict[str, Any],
    prev_mask: np.ndarray,
    cur_mask: np.ndarray,
    t: int,
    flow_lookup: Optional[Callable[[int, int], FlowField]],
) -> float:
    # Grid-baseline manifests were built without flows; their step scores
    # are plain consecutive-frame IoUs and are recomputed the same way.
    if manifest["flow_source"] == "none":
        return iou(prev_mask, cur_mask)
    if flow_lookup is None:
        raise FlowUnavailableError(f"flow lookup required to recompute step ({t - 1}, {t})")
    return iou(warp_mask(prev_mask, flow_lookup(t - 1, t)), cur_mask)


def splice_refined_mask(
    manifest: Dict[str, Any],
    track_id: str,
    frame_index: int,
    mask,
    actor: str = "annotator",
    flow_lookup: Optional[Callable[[int, int], FlowField]] = None,
    timestamp: Optional[str] = None,
) -> Dict[str, Any]:
    """Replace one frame's mask with a human-refined one.

    The entry is marked source "refined", the step IoUs touching the frame
    (into it, and out of it when a next frame exists) are recomputed from
    the stored masks and flows, and a "refined" audit event is appended,
    identical-mask splices included.

    Raises:
        UnknownTrackError: no such track.
        FrameOutOfRangeError: the track has no entry for ``frame_index``.
        DimensionMismatchError: mask does not match clip dims.
        FlowUnavailableError: flows are needed but no lookup was given.
    """
    track = get_track(manifest, track_id)
    m = as_mask(mask)
    h, w = manifest["dims"]
    if m.shape != (h, w):
        raise DimensionMismatchError(f"mask shape {m.shape} does not match clip dims ({h}, {w})")
    entries = track["frames"]
    positions = [e["frame_index"] for e in entries]
    if frame_index not in positions:
        raise FrameOutOfRangeError(
            f"track {track_id!r} covers frames {positions[0]}..{positions[-1]}, not {frame_index}"
        )
    j = positions.index(frame_index)
    entries[j]["mask"] = rle_encode(m)
    entries[j]["source"] = "refined"
    if j > 0:
        prev = rle_decode(entries[j - 1]["mask"])
        entries[j]["step_iou"] = _recompute_step_iou(manifest, prev, m, frame_index, flow_lookup)
    if j + 1 < len(entries):
        nxt = rle_decode(entries[j + 1]["mask"])
        entries[j + 1]["step_iou"] = _recompute_step_iou(
            manifest, m, nxt, frame_index + 1, flow_lookup
        )
    manifest["audit"].append(
        new_audit_event(actor, "refined", {"track_id": track_id, "frame": frame_index}, timestamp)
    )
    return manifest


def verify_manifest(
    manifest: Dict[str, Any],
    flow_lookup: Optional[Callable[[int, int], FlowField]] = None,
) -> List[str]:
    """Re-check schema and stored step IoUs; return a list of problems.

    An empty list means the manifest is internally consistent: every stored
    step_iou equals its recomputation from the stored masks (and flows,
    unless the manifest was built flow-free).
    """
    try:
        validate_manifest(manifest)
    except (SchemaViolationError, VersionUnsupportedError) as exc:
        return [f"{exc.code}: {exc}"]
    problems: List[str] = []
    for i, track in enumerate(manifest["tracks"]):
        entries = track["frames"]
        prev = rle_decode(entries[0]["mask"])
        for j in range(1, len(entries)):
            cur = rle_decode(entries[j]["mask"])
            t = entries[j]["frame_index"]
            try:
                expected = _recompute_step_iou(manifest, prev, cur, t, flow_lookup)
            except FlowUnavailableError as exc:
                problems.append(f"/tracks/{i}/frames/{j}/step_iou: {exc}")
                break
            stored = entries[j]["step_iou"]
            if abs(expected - stored) > 1e-12:
                problems.append(
                    f"/tracks/{i}/frames/{j}/step_iou: stored {stored!r}, recomputed {expected!r}"
                )
            prev = cur
    return problems


def default_manifest_path(clip_dir) -> Optional[Path]:
    """The manifest a clip directory is reviewed through: the collected one
    when present, else the ground-truth one."""
    base = Path(clip_dir)
    for name in (COLLECTED_MANIFEST, GT_MANIFEST):
        candidate = base / name
        if candidate.exists():
            return candidate
    return None
