import copy
import re

import numpy as np
import pytest

from masktrack.config import PipelineConfig
from masktrack.errors import (
    ClipBusyError,
    DimensionMismatchError,
    FlowUnavailableError,
    FrameOutOfRangeError,
    SchemaViolationError,
    UnknownTrackError,
    VersionUnsupportedError,
)
from masktrack.mask import rle_decode, rle_encode
from masktrack.store import (
    COLLECTED_MANIFEST,
    EPOCH_TS,
    GT_MANIFEST,
    default_manifest_path,
    get_track,
    load_manifest,
    manifest_lock,
    new_audit_event,
    save_manifest,
    set_track_status,
    splice_refined_mask,
    track_masks,
    utc_timestamp,
    validate_manifest,
    verify_manifest,
)
from masktrack.synthworld import generate_clip


def box(r0, c0, h=2, w=2, dims=(8, 8)):
    m = np.zeros(dims, dtype=bool)
    m[r0 : r0 + h, c0 : c0 + w] = True
    return m


def small_manifest():
    m = box(1, 1)
    entries = [
        {"frame_index": 1, "mask": rle_encode(m), "source": "auto"},
        {"frame_index": 2, "mask": rle_encode(m), "step_iou": 1.0, "source": "auto"},
        {"frame_index": 3, "mask": rle_encode(m), "step_iou": 1.0, "source": "auto"},
    ]
    return {
        "schema_version": 1,
        "clip_id": "c",
        "dims": [8, 8],
        "frames": ["frame_0001.pgm", "frame_0002.pgm", "frame_0003.pgm"],
        "config": PipelineConfig().to_dict(),
        "flow_source": "none",
        "tracks": [{"track_id": "t000", "status": "auto", "frames": entries}],
        "audit": [new_audit_event("test", "created", {}, EPOCH_TS)],
    }


def test_epoch_and_wall_clock_timestamps():
    assert EPOCH_TS == "1970-01-01T00:00:00Z"
    assert re.fullmatch(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z", utc_timestamp())


def test_new_audit_event_shape():
    event = new_audit_event("alice", "accepted", {"track_id": "t0"})
    assert set(event) == {"timestamp", "actor", "action", "payload"}
    assert event["actor"] == "alice"
    pinned = new_audit_event("batch", "created", {}, EPOCH_TS)
    assert pinned["timestamp"] == EPOCH_TS


def test_validate_accepts_good_manifest():
    validate_manifest(small_manifest())


def test_validate_accepts_optional_fields():
    man = small_manifest()
    man["filter_gamma"] = 0.9
    man["tracks"][0]["status"] = "accepted"
    man["tracks"][0]["frames"][1]["source"] = "refined"
    man["tracks"][0]["frames"][1]["resample"] = True
    validate_manifest(man)


def test_validate_version_gate():
    man = small_manifest()
    man["schema_version"] = 2
    with pytest.raises(VersionUnsupportedError) as exc_info:
        validate_manifest(man)
    assert exc_info.value.code == "VERSION_UNSUPPORTED"
    man["schema_version"] = "1"
    with pytest.raises(SchemaViolationError):
        validate_manifest(man)


@pytest.mark.parametrize(
    "mutate,pointer_bit",
    [
        (lambda m: m.pop("clip_id"), "clip_id"),
        (lambda m: m.update(extra=1), "extra"),
        (lambda m: m.update(dims=[8]), "dims"),
        (lambda m: m.update(flow_source="guessed"), "flow_source"),
        (lambda m: m["tracks"][0].pop("status"), "/tracks/0"),
        (lambda m: m["tracks"][0].update(status="maybe"), "status"),
        (lambda m: m["tracks"][0]["frames"][0].update(step_iou=1.0), "step_iou"),
        (lambda m: m["tracks"][0]["frames"][1].pop("step_iou"), "step_iou"),
        (lambda m: m["tracks"][0]["frames"][1].update(step_iou=1.5), "step_iou"),
        (lambda m: m["tracks"][0]["frames"][1].update(resample="yes"), "resample"),
        (lambda m: m["tracks"][0]["frames"][1].update(frame_index=5), "frame_index"),
        (lambda m: m["tracks"][0]["frames"][0].update(source="magic"), "source"),
        (lambda m: m["audit"][0].pop("actor"), "/audit/0"),
        (lambda m: m["audit"].append({"nope": 1}), "/audit/1"),
    ],
)
def test_validate_rejects_structural_damage(mutate, pointer_bit):
    man = small_manifest()
    mutate(man)
    with pytest.raises(SchemaViolationError) as exc_info:
        validate_manifest(man)
    assert pointer_bit in str(exc_info.value)


def test_validate_rejects_duplicate_track_ids():
    man = small_manifest()
    man["tracks"].append(copy.deepcopy(man["tracks"][0]))
    with pytest.raises(SchemaViolationError, match="duplicate"):
        validate_manifest(man)


def test_validate_rejects_mask_with_wrong_dims():
    man = small_manifest()
    wrong = rle_encode(np.zeros((4, 4), dtype=bool))
    man["tracks"][0]["frames"][0]["mask"] = wrong
    with pytest.raises(SchemaViolationError, match="/tracks/0/frames/0/mask"):
        validate_manifest(man)


def test_validation_error_carries_pointer():
    man = small_manifest()
    del man["tracks"][0]["frames"][1]["step_iou"]
    try:
        validate_manifest(man)
    except SchemaViolationError as exc:
        assert exc.code == "SCHEMA_VIOLATION"
        assert exc.pointer.startswith("/tracks/0/frames/1")
        assert str(exc).endswith(f"(at {exc.pointer})")
    else:
        pytest.fail("expected a schema violation")


def test_save_and_load_round_trip(tmp_path):
    man = small_manifest()
    path = tmp_path / "clip.mug.json"
    save_manifest(man, path)
    assert load_manifest(path) == man
    raw = path.read_text()
    assert raw.endswith("}\n")
    assert '\n  "schema_version": 1,' in raw  # indent=2, stable layout


def test_save_refuses_invalid_manifest(tmp_path):
    man = small_manifest()
    man.pop("audit")
    path = tmp_path / "bad.mug.json"
    with pytest.raises(SchemaViolationError):
        save_manifest(man, path)
    assert not path.exists()  # nothing half-written


def test_load_rejects_bad_json(tmp_path):
    path = tmp_path / "x.mug.json"
    path.write_text("{not json")
    with pytest.raises(SchemaViolationError):
        load_manifest(path)


def test_manifest_lock_excludes_and_cleans_up(tmp_path):
    path = tmp_path / "clip.mug.json"
    lock_path = tmp_path / "clip.mug.json.lock"
    with manifest_lock(path):
        assert lock_path.exists()
        with pytest.raises(ClipBusyError) as exc_info:
            with manifest_lock(path):
                pass
        assert exc_info.value.code == "CLIP_BUSY"
    assert not lock_path.exists()


def test_manifest_lock_releases_on_error(tmp_path):
    path = tmp_path / "clip.mug.json"
    with pytest.raises(RuntimeError):
        with manifest_lock(path):
            raise RuntimeError("boom")
    with manifest_lock(path):
        pass  # reacquirable


def test_get_track_and_masks():
    man = small_manifest()
    track = get_track(man, "t000")
    masks = track_masks(track)
    assert sorted(masks) == [1, 2, 3]
    assert np.array_equal(masks[1], box(1, 1))
    with pytest.raises(UnknownTrackError) as exc_info:
        get_track(man, "missing")
    assert exc_info.value.code == "UNKNOWN_TRACK"


def test_set_track_status_audits_only_real_changes():
    man = small_manifest()
    set_track_status(man, "t000", "accepted", "alice", timestamp=EPOCH_TS)
    assert get_track(man, "t000")["status"] == "accepted"
    events = [e for e in man["audit"] if e["action"] == "accepted"]
    assert len(events) == 1
    assert events[0]["payload"] == {"track_id": "t000"}

    set_track_status(man, "t000", "accepted", "alice", timestamp=EPOCH_TS)
    assert len([e for e in man["audit"] if e["action"] == "accepted"]) == 1

    set_track_status(man, "t000", "rejected", "bob", timestamp=EPOCH_TS)
    assert get_track(man, "t000")["status"] == "rejected"
    assert man["audit"][-1]["actor"] == "bob"


def test_set_track_status_rejects_bad_inputs():
    man = small_manifest()
    with pytest.raises(ValueError):
        set_track_status(man, "t000", "auto", "alice")
    with pytest.raises(UnknownTrackError):
        set_track_status(man, "zzz", "accepted", "alice")


def test_splice_updates_mask_and_adjacent_ious():
    man = small_manifest()  # flow_source "none": plain consecutive IoU
    far = box(5, 5)
    splice_refined_mask(man, "t000", 2, far, actor="ann", timestamp=EPOCH_TS)
    track = get_track(man, "t000")
    assert np.array_equal(rle_decode(track["frames"][1]["mask"]), far)
    assert track["frames"][1]["source"] == "refined"
    assert track["frames"][1]["step_iou"] == 0.0  # frame 1 -> 2 now disjoint
    assert track["frames"][2]["step_iou"] == 0.0  # frame 2 -> 3 as well
    event = man["audit"][-1]
    assert event["action"] == "refined"
    assert event["payload"] == {"track_id": "t000", "frame": 2}

    # splicing the original back heals both neighbours
    splice_refined_mask(man, "t000", 2, box(1, 1), actor="ann", timestamp=EPOCH_TS)
    track = get_track(man, "t000")
    assert track["frames"][1]["step_iou"] == 1.0
    assert track["frames"][2]["step_iou"] == 1.0


def test_splice_first_frame_touches_only_next_step():
    man = small_manifest()
    splice_refined_mask(man, "t000", 1, box(5, 5), actor="ann", timestamp=EPOCH_TS)
    track = get_track(man, "t000")
    assert "step_iou" not in track["frames"][0]
    assert track["frames"][1]["step_iou"] == 0.0
    assert track["frames"][2]["step_iou"] == 1.0


def test_splice_with_exact_flow_recomputes_through_warp():
    scene = generate_clip(dims=(48, 48), frame_count=5, shape_count=2, seed=4)
    man = scene.gt_manifest("c4")
    tid = man["tracks"][0]["track_id"]
    flow_lookup = lambda a, b: scene.flow(b)

    splice_refined_mask(man, tid, 3, box(5, 5, dims=(48, 48)), flow_lookup=flow_lookup)
    track = get_track(man, tid)
    assert track["frames"][2]["step_iou"] < 1.0
    assert track["frames"][3]["step_iou"] < 1.0

    original = scene.region_mask(tid, 3)
    splice_refined_mask(man, tid, 3, original, flow_lookup=flow_lookup)
    track = get_track(man, tid)
    assert track["frames"][2]["step_iou"] == 1.0
    assert track["frames"][3]["step_iou"] == 1.0
    assert verify_manifest(man, flow_lookup) == []


def test_splice_needs_flow_when_manifest_claims_flows():
    man = small_manifest()
    man["flow_source"] = "exact"
    with pytest.raises(FlowUnavailableError):
        splice_refined_mask(man, "t000", 2, box(1, 1))


def test_splice_guards():
    man = small_manifest()
    with pytest.raises(UnknownTrackError):
        splice_refined_mask(man, "nope", 2, box(1, 1))
    with pytest.raises(FrameOutOfRangeError) as exc_info:
        splice_refined_mask(man, "t000", 9, box(1, 1))
    assert exc_info.value.code == "FRAME_OUT_OF_RANGE"
    with pytest.raises(DimensionMismatchError):
        splice_refined_mask(man, "t000", 2, np.zeros((4, 4), dtype=bool))


def test_verify_clean_and_tampered():
    man = small_manifest()
    assert verify_manifest(man) == []
    man["tracks"][0]["frames"][1]["step_iou"] = 0.25
    problems = verify_manifest(man)
    assert len(problems) == 1
    assert problems[0].startswith("/tracks/0/frames/1/step_iou")
    assert "0.25" in problems[0]


def test_verify_reports_schema_failures_as_single_problem():
    man = small_manifest()
    man.pop("frames")
    problems = verify_manifest(man)
    assert len(problems) == 1
    assert problems[0].startswith("SCHEMA_VIOLATION")


def test_verify_without_flows_on_flow_manifest():
    scene = generate_clip(dims=(32, 32), frame_count=3, shape_count=1, seed=1)
    man = scene.gt_manifest("c1")
    # flow_source exact but no lookup: every track reports the missing flow
    problems = verify_manifest(man)
    assert len(problems) == len(man["tracks"])
    assert all("flow lookup required" in p for p in problems)
    assert verify_manifest(man, lambda a, b: scene.flow(b)) == []


def test_default_manifest_path_prefers_collected(tmp_path):
    assert default_manifest_path(tmp_path) is None
    (tmp_path / GT_MANIFEST).write_text("{}")
    assert default_manifest_path(tmp_path).name == GT_MANIFEST
    (tmp_path / COLLECTED_MANIFEST).write_text("{}")
    assert default_manifest_path(tmp_path).name == COLLECTED_MANIFEST
