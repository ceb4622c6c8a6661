"""Track collection: seeding, flow-guided propagation, and curation.

The per-frame step mirrors the collection recipe end to end: sample points
on the previous mask, carry them through the flow, prompt the segmenter,
and keep the candidate that best overlaps the flow-warped previous mask.
That selection IoU is the step score the gamma filter later consumes.
"""

from __future__ import annotations

import copy
import hashlib
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .config import PipelineConfig
from .errors import NoCandidateError, TrackLostError
from .flow import FlowField, warp_mask, warp_points
from .mask import as_mask, iou, mask_area, rle_encode
from .sampling import Point, grid_points, uniform_points
from .segmenter import PointPrompt, Segmenter

logger = logging.getLogger(__name__)


def init_seed_masks(
    frame_ref, dims: Tuple[int, int], segmenter: Segmenter, config: PipelineConfig
) -> List[np.ndarray]:
    """Seed tracks by prompting every grid cell center of the first frame.

    All candidates from all grid points are pooled, sorted by predicted IoU
    (stable), and thinned by greedy NMS: a mask overlapping an already-kept
    mask with IoU above ``config.dedup_iou`` is suppressed. Grid points that
    yield no candidate are skipped; an all-miss frame gives an empty list.
    """
    h, w = dims
    pool = []
    for point in grid_points(h, w, config.grid_per_side):
        try:
            candidates = segmenter.segment(
                frame_ref, [PointPrompt(point, "positive")], config.max_candidates
            )
        except NoCandidateError:
            continue
        pool.extend(candidates)
    order = sorted(range(len(pool)), key=lambda i: -pool[i].predicted_iou)
    kept: List[np.ndarray] = []
    # Byte-level dedup short-circuits exact duplicates; with dedup_iou < 1
    # they would be suppressed by (or share the fate of) their first copy.
    seen: Optional[set] = set() if config.dedup_iou < 1.0 else None
    for i in order:
        mask = pool[i].mask
        if seen is not None:
            key = mask.tobytes()
            if key in seen:
                continue
            seen.add(key)
        if all(iou(mask, k) <= config.dedup_iou for k in kept):
            kept.append(mask)
    return kept


class StepResult(NamedTuple):
    mask: np.ndarray
    step_iou: float
    prompts: List[Point]


def propagate_track_step(
    prev_mask,
    flow: FlowField,
    frame_ref,
    segmenter: Segmenter,
    config: PipelineConfig,
    rng: Optional[np.random.Generator] = None,
    points: Optional[List[Point]] = None,
) -> StepResult:
    """Advance one track by one frame.

    Points are sampled uniformly on the previous mask unless a carried point
    set is supplied, warped by the flow, and sent as positive prompts. The
    winning candidate maximizes IoU against the flow-warped previous mask;
    ties fall to the earlier candidate. The warped point list is returned so
    the caller can carry it into the next step when resampling is withheld.

    Raises:
        TrackLostError: empty previous mask, or the segmenter finds nothing.
    """
    prev = as_mask(prev_mask)
    if mask_area(prev) == 0:
        raise TrackLostError("previous mask is empty")
    if points is None:
        generator = rng if rng is not None else np.random.default_rng(config.seed)
        points = uniform_points(prev, config.points_per_target, generator)
    warped = warp_points(points, flow)
    prompts = [PointPrompt(p, "positive") for p in warped]
    try:
        candidates = segmenter.segment(frame_ref, prompts, config.max_candidates)
    except NoCandidateError as exc:
        raise TrackLostError(f"no candidate for frame {frame_ref}: {exc}") from exc
    warped_prev = warp_mask(prev, flow)
    scores = [iou(warped_prev, c.mask) for c in candidates]
    best = int(np.argmax(scores))
    return StepResult(candidates[best].mask, float(scores[best]), warped)


def resample_decision(index: int, iou_value: float, config: PipelineConfig) -> bool:
    """True when prompts should be re-drawn from the current mask: the index
    hits the resample period and consecutive-frame IoU clears alpha."""
    return index % config.resample_period == 0 and iou_value > config.alpha


def resample_prompts(prev_mask, current_mask, frame_index: int, config: PipelineConfig) -> bool:
    """Mask-pair form of :func:`resample_decision` using the plain
    (unwarped) IoU between consecutive selected masks."""
    return resample_decision(frame_index, iou(prev_mask, current_mask), config)


def collect_clip(
    frames: Sequence[str],
    dims: Tuple[int, int],
    flow_lookup: Optional[Callable[[int, int], FlowField]],
    segmenter: Segmenter,
    config: PipelineConfig,
    clip_id: str = "clip",
    threads: int = 1,
    flow_source: str = "exact",
    baseline_grid: bool = False,
    progress: Optional[Callable[[int, int], None]] = None,
) -> Dict:
    """Run the full collection pass over one clip and build its manifest.

    Seeds come from :func:`init_seed_masks` on frame 1; each seed is then
    propagated independently through frames 2..T. A lost track keeps its
    prefix. Tracks may run on a thread pool; every track draws from its own
    RNG stream keyed by (config.seed, seed-mask content digest), so the
    output is byte-identical at any thread count and no track's stream
    shifts when another seed appears or disappears.

    ``baseline_grid`` switches to the comparison mode that re-seeds every
    frame and links masks frame to frame by plain unwarped IoU; it consults
    no flows and records flow_source "none".

    Raises:
        FlowUnavailableError: a consecutive frame pair has no flow.
    """
    from .store import EPOCH_TS, SCHEMA_VERSION, new_audit_event

    if len(frames) < 2:
        raise ValueError(f"a clip needs at least 2 frames, got {len(frames)}")
    total_frames = len(frames)
    seeds = init_seed_masks(frames[0], dims, segmenter, config)
    logger.info("seeded %d tracks on %s", len(seeds), frames[0])

    done_lock = threading.Lock()
    done = [0]
    total_steps = max(1, len(seeds) * (total_frames - 1))

    def tick():
        if progress is None:
            return
        with done_lock:
            done[0] += 1
            progress(done[0], total_steps)

    if baseline_grid:
        track_entries = _collect_baseline(frames, dims, segmenter, config, seeds, tick)
    else:
        flows = {t: flow_lookup(t - 1, t) for t in range(2, total_frames + 1)}

        def run_track(seed_mask: np.ndarray) -> List[Dict]:
            digest = int.from_bytes(hashlib.sha256(seed_mask.tobytes()).digest()[:8], "big")
            rng = np.random.default_rng(np.random.SeedSequence([config.seed, digest]))
            entries = [{"frame_index": 1, "mask": rle_encode(seed_mask), "source": "auto"}]
            prev = seed_mask
            carried: Optional[List[Point]] = None
            for t in range(2, total_frames + 1):
                try:
                    step = propagate_track_step(
                        prev, flows[t], frames[t - 1], segmenter, config,
                        rng=rng, points=carried,
                    )
                except TrackLostError as exc:
                    logger.info("track truncated at frame %d: %s", t, exc)
                    break
                resample = resample_prompts(prev, step.mask, t, config)
                entries.append(
                    {
                        "frame_index": t,
                        "mask": rle_encode(step.mask),
                        "step_iou": step.step_iou,
                        "source": "auto",
                        "resample": resample,
                    }
                )
                carried = None if resample else step.prompts
                prev = step.mask
                tick()
            return entries

        if threads > 1 and len(seeds) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                track_entries = list(pool.map(run_track, seeds))
        else:
            track_entries = [run_track(s) for s in seeds]

    tracks = [
        {"track_id": f"t{i:03d}", "status": "auto", "frames": entries}
        for i, entries in enumerate(track_entries)
    ]
    return {
        "schema_version": SCHEMA_VERSION,
        "clip_id": clip_id,
        "dims": [int(dims[0]), int(dims[1])],
        "frames": list(frames),
        "config": config.to_dict(),
        "flow_source": "none" if baseline_grid else flow_source,
        "tracks": tracks,
        "audit": [
            new_audit_event(
                "pipeline", "created", {"clip_id": clip_id, "tracks": len(tracks)}, EPOCH_TS
            )
        ],
    }


def _collect_baseline(
    frames: Sequence[str],
    dims: Tuple[int, int],
    segmenter: Segmenter,
    config: PipelineConfig,
    seeds: List[np.ndarray],
    tick: Callable[[], None],
) -> List[List[Dict]]:
    """Grid-per-frame comparison mode: fresh seeding each frame, tracks
    linked by unwarped IoU argmax. A zero-overlap best match ends a track."""
    states = [
        {"entries": [{"frame_index": 1, "mask": rle_encode(s), "source": "auto"}], "prev": s, "alive": True}
        for s in seeds
    ]
    for t in range(2, len(frames) + 1):
        candidates = init_seed_masks(frames[t - 1], dims, segmenter, config)
        for state in states:
            if not state["alive"]:
                continue
            if not candidates:
                state["alive"] = False
                continue
            scores = [iou(state["prev"], c) for c in candidates]
            best = int(np.argmax(scores))
            if scores[best] == 0.0:
                state["alive"] = False
                continue
            state["entries"].append(
                {
                    "frame_index": t,
                    "mask": rle_encode(candidates[best]),
                    "step_iou": float(scores[best]),
                    "source": "auto",
                }
            )
            state["prev"] = candidates[best]
            tick()
    return [s["entries"] for s in states]


def filter_tracks(manifest: Dict, gamma: float) -> Dict:
    """Apply the gamma curation rule, returning an updated deep copy.

    A track is kept only when it spans the whole clip and every recorded
    step IoU strictly exceeds ``gamma``; failing tracks are marked rejected
    with a "filtered" audit event rather than deleted. Tracks already
    rejected (by a human or an earlier pass) stay rejected, so re-running
    with the same gamma is a no-op.
    """
    from .store import EPOCH_TS, new_audit_event

    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    out = copy.deepcopy(manifest)
    frame_total = len(out["frames"])
    for track in out["tracks"]:
        entries = track["frames"]
        full_span = len(entries) == frame_total and entries[0]["frame_index"] == 1
        passes = full_span and all(e["step_iou"] > gamma for e in entries[1:])
        if not passes and track["status"] != "rejected":
            track["status"] = "rejected"
            out["audit"].append(
                new_audit_event(
                    "pipeline",
                    "filtered",
                    {"track_id": track["track_id"], "gamma": gamma},
                    EPOCH_TS,
                )
            )
    out["filter_gamma"] = gamma
    return out
