import json

import numpy as np
import pytest

from masktrack.config import PipelineConfig
from masktrack.errors import FlowUnavailableError, NoCandidateError, TrackLostError
from masktrack.flow import FlowField
from masktrack.mask import rle_decode, rle_encode
from masktrack.pipeline import (
    collect_clip,
    filter_tracks,
    init_seed_masks,
    propagate_track_step,
    resample_decision,
    resample_prompts,
)
from masktrack.sampling import Point
from masktrack.segmenter import CandidateMask, OracleSegmenter, Segmenter
from masktrack.store import new_audit_event, validate_manifest
from masktrack.synthworld import SyntheticScene, generate_clip, make_shape


class StubSegmenter(Segmenter):
    """Canned-response backend recording every request it sees."""

    def __init__(self, candidates):
        self.candidates = candidates
        self.calls = []

    def segment(self, frame_ref, prompts, max_candidates=3):
        self.calls.append((frame_ref, list(prompts), max_candidates))
        if not self.candidates:
            raise NoCandidateError("stub has nothing")
        return self.candidates[:max_candidates]


def static_scene(frames=3):
    shape = make_shape("sq", "rectangle", {"h": 4, "w": 4}, [(2, 2)] * frames)
    return SyntheticScene(12, 12, frames, [shape])


def block(h, w, r0, c0, hh, ww):
    m = np.zeros((h, w), dtype=bool)
    m[r0 : r0 + hh, c0 : c0 + ww] = True
    return m


def test_seeding_finds_every_granularity_once():
    scene = static_scene()
    config = PipelineConfig(grid_per_side=4)
    seeds = init_seed_masks(1, (12, 12), OracleSegmenter(scene), config)
    expected = {scene.region_mask(rid, 1).tobytes() for rid in scene.region_ids()}
    assert {s.tobytes() for s in seeds} == expected
    assert len(seeds) == 4  # whole, left, right, background -- no duplicates


def test_seeding_nms_suppresses_heavy_overlap():
    scene = static_scene()
    # a part overlaps its whole with IoU 0.5; dropping the threshold below
    # that suppresses the whole (parts come first: smaller area, equal score)
    config = PipelineConfig(grid_per_side=4, dedup_iou=0.4)
    seeds = init_seed_masks(1, (12, 12), OracleSegmenter(scene), config)
    areas = sorted(int(s.sum()) for s in seeds)
    assert areas == [8, 8, 128]  # left, right, background; whole suppressed


def test_seeding_all_misses_yields_empty_list():
    seeds = init_seed_masks(1, (8, 8), StubSegmenter([]), PipelineConfig(grid_per_side=2))
    assert seeds == []


def test_propagation_follows_motion_exactly():
    shape = make_shape("m", "rectangle", {"h": 4, "w": 4}, [(1, 1), (4, 3), (7, 5)])
    scene = SyntheticScene(16, 16, 3, [shape])
    seg = OracleSegmenter(scene)
    config = PipelineConfig()
    prev = scene.shape_mask(shape, 1)
    for t in (2, 3):
        step = propagate_track_step(
            prev, scene.flow(t), t, seg, config, rng=np.random.default_rng(0)
        )
        assert step.step_iou == 1.0
        assert np.array_equal(step.mask, scene.shape_mask(shape, t))
        prev = step.mask


def test_propagation_empty_mask_is_lost():
    with pytest.raises(TrackLostError) as exc_info:
        propagate_track_step(
            np.zeros((8, 8), dtype=bool), FlowField.zeros(8, 8), 2,
            StubSegmenter([]), PipelineConfig(),
        )
    assert exc_info.value.code == "TRACK_LOST"


def test_propagation_no_candidate_is_lost():
    with pytest.raises(TrackLostError):
        propagate_track_step(
            block(8, 8, 1, 1, 2, 2), FlowField.zeros(8, 8), 2,
            StubSegmenter([]), PipelineConfig(),
        )


def test_propagation_ties_take_the_earlier_candidate():
    prev = block(8, 8, 0, 0, 2, 2)
    first = block(8, 8, 0, 0, 1, 2)   # IoU 0.5 against prev
    second = block(8, 8, 1, 0, 1, 2)  # also IoU 0.5
    seg = StubSegmenter([CandidateMask(first, 1.0, 1.0), CandidateMask(second, 1.0, 1.0)])
    step = propagate_track_step(prev, FlowField.zeros(8, 8), 2, seg, PipelineConfig())
    assert step.step_iou == 0.5
    assert np.array_equal(step.mask, first)


def test_propagation_carried_points_skip_sampling():
    prev = block(8, 8, 2, 2, 3, 3)
    target = CandidateMask(block(8, 8, 2, 3, 3, 3), 1.0, 1.0)
    seg = StubSegmenter([target])
    flow = FlowField(np.ones((8, 8), np.float32), np.zeros((8, 8), np.float32))
    carried = [Point(2.0, 2.0), Point(4.0, 4.0)]
    step = propagate_track_step(prev, flow, 2, seg, PipelineConfig(), points=carried)
    sent = [p.point for p in seg.calls[0][1]]
    assert sent == [Point(3.0, 2.0), Point(5.0, 4.0)]  # carried points, warped
    assert step.prompts == sent


def test_propagation_prompt_count_and_determinism():
    scene = static_scene()
    seg = OracleSegmenter(scene)
    config = PipelineConfig(points_per_target=5)
    prev = scene.region_mask("sq", 1)
    a = propagate_track_step(prev, scene.flow(2), 2, seg, config, rng=np.random.default_rng(9))
    b = propagate_track_step(prev, scene.flow(2), 2, seg, config, rng=np.random.default_rng(9))
    assert a.prompts == b.prompts
    assert len(a.prompts) == 5


def test_resample_decision_period_and_threshold():
    config = PipelineConfig(alpha=0.2, resample_period=2)
    assert not resample_decision(1, 0.9, config)   # off-period index
    assert resample_decision(2, 0.9, config)
    assert not resample_decision(2, 0.2, config)   # alpha is strict
    assert not resample_decision(2, 0.1, config)
    config = PipelineConfig(alpha=0.2, resample_period=1)
    assert resample_decision(3, 0.21, config)


def test_resample_prompts_uses_mask_iou():
    config = PipelineConfig(alpha=0.5, resample_period=1)
    a = block(6, 6, 0, 0, 2, 2)
    assert resample_prompts(a, a, 2, config)
    far = block(6, 6, 4, 4, 2, 2)
    assert not resample_prompts(a, far, 2, config)


@pytest.fixture(scope="module")
def collected():
    scene = generate_clip(dims=(48, 48), frame_count=6, shape_count=2, seed=5)
    config = PipelineConfig(seed=5)
    manifest = collect_clip(
        scene.frame_names(), (48, 48), lambda a, b: scene.flow(b),
        OracleSegmenter(scene), config, clip_id="clip5",
    )
    return scene, manifest


def test_collect_recovers_every_region_perfectly(collected):
    from oracles import iou_oracle

    scene, manifest = collected
    validate_manifest(manifest)
    assert len(manifest["tracks"]) == len(scene.region_ids())
    for track in manifest["tracks"]:
        assert len(track["frames"]) == scene.frame_count
        assert track["status"] == "auto"
        prev = rle_decode(track["frames"][0]["mask"])
        for entry in track["frames"][1:]:
            assert entry["step_iou"] == 1.0
            assert entry["source"] == "auto"
            # the resample flag follows the plain consecutive-mask IoU, which
            # is 1.0 for static regions but 0 when a shape cycles to a new slot
            cur = rle_decode(entry["mask"])
            assert entry["resample"] == (iou_oracle(prev, cur) > 0.2)
            prev = cur


def test_collect_matches_ground_truth_masks(collected):
    scene, manifest = collected
    by_content = {
        scene.region_mask(rid, 1).tobytes(): rid for rid in scene.region_ids()
    }
    for track in manifest["tracks"]:
        rid = by_content[rle_decode(track["frames"][0]["mask"]).tobytes()]
        for entry in track["frames"]:
            gt = scene.region_mask(rid, entry["frame_index"])
            assert np.array_equal(rle_decode(entry["mask"]), gt)


def test_collect_is_thread_deterministic(collected):
    scene, manifest = collected
    again = collect_clip(
        scene.frame_names(), (48, 48), lambda a, b: scene.flow(b),
        OracleSegmenter(scene), PipelineConfig(seed=5), clip_id="clip5", threads=6,
    )
    assert json.dumps(again, sort_keys=True) == json.dumps(manifest, sort_keys=True)


def test_collect_missing_flow_fails_before_segmenting():
    scene = static_scene()

    def no_flow(a, b):
        raise FlowUnavailableError(f"no flow for ({a}, {b})")

    with pytest.raises(FlowUnavailableError):
        collect_clip(
            scene.frame_names(), (12, 12), no_flow, OracleSegmenter(scene),
            PipelineConfig(), clip_id="x",
        )


def test_collect_needs_two_frames():
    with pytest.raises(ValueError):
        collect_clip(["frame_0001.pgm"], (8, 8), None, StubSegmenter([]), PipelineConfig())


def test_collect_reports_progress():
    scene = static_scene(frames=4)
    calls = []
    collect_clip(
        scene.frame_names(), (12, 12), lambda a, b: scene.flow(b),
        OracleSegmenter(scene), PipelineConfig(grid_per_side=4),
        progress=lambda done, total: calls.append((done, total)),
    )
    assert calls  # 4 seeds x 3 steps
    assert calls[-1] == (12, 12)
    assert [c[0] for c in calls] == list(range(1, 13))


def test_collect_baseline_mode_records_no_flow_use(collected):
    scene, _ = collected
    manifest = collect_clip(
        scene.frame_names(), (48, 48), None, OracleSegmenter(scene),
        PipelineConfig(seed=5), clip_id="clip5", baseline_grid=True,
    )
    validate_manifest(manifest)
    assert manifest["flow_source"] == "none"
    for track in manifest["tracks"]:
        for entry in track["frames"]:
            assert "resample" not in entry
    # static regions are still recovered because linking needs no motion
    statics = [t for t in manifest["tracks"] if len(t["frames"]) == scene.frame_count]
    assert statics


def manifest_for_filter(ious_per_track, frame_count=4):
    mask = rle_encode(block(8, 8, 1, 1, 3, 3))
    tracks = []
    for i, ious in enumerate(ious_per_track):
        entries = [{"frame_index": 1, "mask": mask, "source": "auto"}]
        for j, value in enumerate(ious):
            entries.append(
                {"frame_index": j + 2, "mask": mask, "step_iou": value, "source": "auto"}
            )
        tracks.append({"track_id": f"t{i:03d}", "status": "auto", "frames": entries})
    return {
        "schema_version": 1,
        "clip_id": "f",
        "dims": [8, 8],
        "frames": [f"frame_{t:04d}.pgm" for t in range(1, frame_count + 1)],
        "config": PipelineConfig().to_dict(),
        "flow_source": "none",
        "tracks": tracks,
        "audit": [new_audit_event("test", "created", {}, "1970-01-01T00:00:00Z")],
    }


def test_filter_threshold_is_strict():
    manifest = manifest_for_filter([[1.0, 0.9, 1.0]])
    validate_manifest(manifest)
    at_gamma = filter_tracks(manifest, 0.9)
    assert at_gamma["tracks"][0]["status"] == "rejected"
    below = filter_tracks(manifest, 0.89)
    assert below["tracks"][0]["status"] == "auto"
    assert below["filter_gamma"] == 0.89


def test_filter_rejects_short_tracks():
    manifest = manifest_for_filter([[1.0, 1.0, 1.0], [1.0, 1.0]])
    out = filter_tracks(manifest, 0.5)
    assert out["tracks"][0]["status"] == "auto"
    assert out["tracks"][1]["status"] == "rejected"


def test_filter_leaves_input_untouched_and_audits():
    manifest = manifest_for_filter([[0.3, 1.0, 1.0]])
    out = filter_tracks(manifest, 0.5)
    assert manifest["tracks"][0]["status"] == "auto"
    assert "filter_gamma" not in manifest
    events = [e for e in out["audit"] if e["action"] == "filtered"]
    assert len(events) == 1
    assert events[0]["payload"] == {"track_id": "t000", "gamma": 0.5}


def test_filter_is_idempotent_and_never_unrejects():
    manifest = manifest_for_filter([[0.3, 1.0, 1.0], [1.0, 1.0, 1.0]])
    manifest["tracks"][1]["status"] = "rejected"  # human said no; a pass cannot undo it
    once = filter_tracks(manifest, 0.5)
    assert [t["status"] for t in once["tracks"]] == ["rejected", "rejected"]
    twice = filter_tracks(once, 0.5)
    assert twice["audit"] == once["audit"]
    assert [t["status"] for t in twice["tracks"]] == ["rejected", "rejected"]


def test_filter_monotone_in_gamma():
    manifest = manifest_for_filter([[1.0, 1.0, 1.0], [0.95, 0.92, 0.97], [0.6, 1.0, 0.8]])
    rejected_at = {}
    for gamma in (0.0, 0.5, 0.9, 0.99):
        out = filter_tracks(manifest, gamma)
        rejected_at[gamma] = {
            t["track_id"] for t in out["tracks"] if t["status"] == "rejected"
        }
    assert rejected_at[0.0] <= rejected_at[0.5] <= rejected_at[0.9] <= rejected_at[0.99]
    assert rejected_at[0.5] == set()
    assert rejected_at[0.9] == {"t002"}
    assert rejected_at[0.99] == {"t001", "t002"}


def test_filter_validates_gamma():
    with pytest.raises(ValueError):
        filter_tracks(manifest_for_filter([[1.0] * 3]), 1.5)
