"""Track evaluation (J, F, J&F) and dataset statistics.

Two evaluation modes exist. Per-track mode scores each track against its
ground-truth counterpart independently, so spatially overlapping tracks are
fine; this is the native mode for multi-granularity data. VOS mode instead
composes all tracks of a frame into one exclusive label map first and
refuses overlapping input.
"""

from __future__ import annotations

import math
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DimensionMismatchError,
    FrameRangeMismatchError,
    OverlapInVosModeError,
)
from .mask import as_mask, boundary_f_score, iou, rle_decode

STATS_COLUMNS = ("Density", "Masks", "Mask Tracks", "Masks per Frame", "Annotated Frames")


def default_tolerance(height: int, width: int) -> int:
    """Boundary tolerance in pixels: ceil(0.008 x image diagonal)."""
    return int(math.ceil(0.008 * math.hypot(height, width)))


def eval_track_jf(
    pred: Mapping[int, Any],
    gt: Mapping[int, Any],
    tolerance: float,
    dims: Optional[Tuple[int, int]] = None,
) -> Dict[str, float]:
    """Score one track against its ground truth.

    Both arguments map frame index to mask. Evaluation runs over the ground
    truth's frames; a frame missing from ``pred`` is scored as an empty
    prediction (absent frames can only hurt, never hide). J is the mean IoU
    over frames, F the mean boundary F-score, JF their average.
    """
    frames = sorted(gt)
    if not frames:
        raise ValueError("ground-truth track has no frames")
    if dims is None:
        first = as_mask(gt[frames[0]])
        dims = first.shape
    empty = np.zeros(dims, dtype=bool)
    js: List[float] = []
    fs: List[float] = []
    for t in frames:
        g = as_mask(gt[t])
        p = as_mask(pred[t]) if t in pred else empty
        js.append(iou(p, g))
        fs.append(boundary_f_score(p, g, tolerance))
    j = float(np.mean(js))
    f = float(np.mean(fs))
    return {"J": j, "F": f, "JF": (j + f) / 2.0}


def _track_frames(track: Dict) -> Dict[int, np.ndarray]:
    return {e["frame_index"]: rle_decode(e["mask"]) for e in track["frames"]}


def _active_tracks(manifest: Dict) -> List[Dict]:
    return [t for t in manifest["tracks"] if t["status"] != "rejected"]


def eval_manifest(
    pred_manifest: Dict,
    gt_manifest: Dict,
    mode: str = "per-track",
    tolerance: Optional[float] = None,
) -> Dict[str, Any]:
    """Evaluate a predicted manifest against a ground-truth manifest.

    Correspondence is by track_id over the ground truth's non-rejected
    tracks; rejected predicted tracks are treated as absent. A ground-truth
    track with no predicted counterpart scores against all-empty predictions
    and is reported in ``warnings`` rather than raised. Dataset scores are
    the unweighted mean over evaluated tracks.

    Raises:
        DimensionMismatchError: manifests disagree on clip dims.
        FrameRangeMismatchError: manifests disagree on frame count, or a
            ground-truth entry indexes past the clip.
        OverlapInVosModeError: VOS mode with overlapping masks in a frame.
    """
    if mode not in ("per-track", "vos"):
        raise ValueError(f"mode must be 'per-track' or 'vos', got {mode!r}")
    if list(pred_manifest["dims"]) != list(gt_manifest["dims"]):
        raise DimensionMismatchError(
            f"clip dims differ: {pred_manifest['dims']} vs {gt_manifest['dims']}"
        )
    frame_total = len(pred_manifest["frames"])
    if frame_total != len(gt_manifest["frames"]):
        raise FrameRangeMismatchError(
            f"frame counts differ: {frame_total} vs {len(gt_manifest['frames'])}"
        )
    h, w = (int(v) for v in gt_manifest["dims"])
    tol = default_tolerance(h, w) if tolerance is None else tolerance

    gt_tracks = _active_tracks(gt_manifest)
    for track in gt_tracks:
        last = track["frames"][-1]["frame_index"]
        if last > frame_total:
            raise FrameRangeMismatchError(
                f"gt track {track['track_id']} references frame {last} of {frame_total}"
            )
    pred_tracks = _active_tracks(pred_manifest)

    if mode == "vos":
        gt_by_id = _decompose(_compose_label_maps(gt_tracks, (h, w), "gt"), gt_tracks)
        pred_by_id = _decompose(_compose_label_maps(pred_tracks, (h, w), "pred"), pred_tracks)
    else:
        gt_by_id = {t["track_id"]: _track_frames(t) for t in gt_tracks}
        pred_by_id = {t["track_id"]: _track_frames(t) for t in pred_tracks}

    warnings: List[str] = []
    scores: Dict[str, Dict[str, float]] = {}
    for track in gt_tracks:
        tid = track["track_id"]
        if tid not in pred_by_id:
            warnings.append(f"MISSING_TRACK: {tid} has no predicted counterpart")
        scores[tid] = eval_track_jf(pred_by_id.get(tid, {}), gt_by_id[tid], tol, dims=(h, w))

    if scores:
        dataset = {
            "J": float(np.mean([s["J"] for s in scores.values()])),
            "F": float(np.mean([s["F"] for s in scores.values()])),
        }
        dataset["JF"] = (dataset["J"] + dataset["F"]) / 2.0
    else:
        dataset = {"J": 0.0, "F": 0.0, "JF": 0.0}
    return {
        "mode": mode,
        "tolerance": float(tol),
        "tracks": scores,
        "dataset": dataset,
        "warnings": warnings,
    }


def _compose_label_maps(
    tracks: Sequence[Dict], dims: Tuple[int, int], which: str
) -> Dict[int, np.ndarray]:
    """Per-frame exclusive label maps; track k (1-based) owns value k."""
    maps: Dict[int, np.ndarray] = {}
    for code, track in enumerate(tracks, start=1):
        for entry in track["frames"]:
            t = entry["frame_index"]
            m = rle_decode(entry["mask"])
            if t not in maps:
                maps[t] = np.zeros(dims, dtype=np.int32)
            if (maps[t][m] != 0).any():
                raise OverlapInVosModeError(
                    f"{which} masks overlap in frame {t} (track {track['track_id']})"
                )
            maps[t][m] = code
    return maps


def _decompose(
    maps: Dict[int, np.ndarray], tracks: Sequence[Dict]
) -> Dict[str, Dict[int, np.ndarray]]:
    out: Dict[str, Dict[int, np.ndarray]] = {}
    for code, track in enumerate(tracks, start=1):
        frames = [e["frame_index"] for e in track["frames"]]
        out[track["track_id"]] = {t: maps[t] == code for t in frames}
    return out


def dataset_stats(manifests: Sequence[Dict]) -> Dict[str, Any]:
    """Aggregate density and count statistics over a manifest set.

    Density is the per-frame fraction of pixels covered by the union of all
    (non-rejected) track masks, averaged over annotated frames; a frame is
    annotated when at least one mask lands on it. An empty input yields an
    all-zero report.
    """
    total_masks = 0
    mask_tracks = 0
    annotated = 0
    density_sum = 0.0
    for manifest in manifests:
        h, w = (int(v) for v in manifest["dims"])
        unions: Dict[int, np.ndarray] = {}
        for track in _active_tracks(manifest):
            mask_tracks += 1
            for entry in track["frames"]:
                m = rle_decode(entry["mask"])
                total_masks += 1
                t = entry["frame_index"]
                if t in unions:
                    unions[t] |= m
                else:
                    unions[t] = m
        for union in unions.values():
            annotated += 1
            density_sum += float(np.count_nonzero(union)) / (h * w)
    return {
        "density": density_sum / annotated if annotated else 0.0,
        "total_masks": total_masks,
        "mask_tracks": mask_tracks,
        "masks_per_frame": total_masks / annotated if annotated else 0.0,
        "annotated_frames": annotated,
    }


def _format_count(n: float) -> str:
    n = int(n)
    if n >= 10000:
        return f"{round(n / 1000)}K"
    return f"{n:,}"


def format_stats_row(
    label: str,
    density: float,
    masks: int,
    mask_tracks: int,
    masks_per_frame: float,
    annotated_frames: int,
) -> str:
    """One ampersand-separated summary row, columns in the fixed order
    Density, Masks, Mask Tracks, Masks per Frame, Annotated Frames."""
    cells = [
        str(label),
        f"{density:.3f}",
        _format_count(masks),
        _format_count(mask_tracks),
        f"{masks_per_frame:.1f}",
        _format_count(annotated_frames),
    ]
    return " & ".join(cells)


def render_stats_table(stats: Dict[str, Any]) -> str:
    """Aligned two-line text table in the same column order as
    :func:`format_stats_row`."""
    values = (
        f"{stats['density']:.3f}",
        str(stats["total_masks"]),
        str(stats["mask_tracks"]),
        f"{stats['masks_per_frame']:.1f}",
        str(stats["annotated_frames"]),
    )
    widths = [max(len(h), len(v)) for h, v in zip(STATS_COLUMNS, values)]
    head = "  ".join(h.ljust(w) for h, w in zip(STATS_COLUMNS, widths))
    body = "  ".join(v.rjust(w) for v, w in zip(values, widths))
    return head + "\n" + body


def render_eval_table(report: Dict[str, Any]) -> str:
    """Aligned per-track score table with a trailing dataset row."""
    rows = [("track", "J", "F", "J&F")]
    for tid in sorted(report["tracks"]):
        s = report["tracks"][tid]
        rows.append((tid, f"{s['J']:.4f}", f"{s['F']:.4f}", f"{s['JF']:.4f}"))
    d = report["dataset"]
    rows.append(("dataset", f"{d['J']:.4f}", f"{d['F']:.4f}", f"{d['JF']:.4f}"))
    widths = [max(len(r[c]) for r in rows) for c in range(4)]
    lines = []
    for r in rows:
        lines.append(
            "  ".join(cell.ljust(widths[c]) if c == 0 else cell.rjust(widths[c]) for c, cell in enumerate(r))
        )
    return "\n".join(lines)
