"""Deterministic synthetic clips with exact ground truth and exact flows.

The generator composes parametric shapes (rectangles, disks, rings) moving
with integer velocities over a static background. Every frame therefore has
an exact multi-granularity region decomposition (whole shapes, their parts,
the background) and exact flow fields, which is what lets the rest of the
pipeline be verified end to end instead of eyeballed.

Randomly generated scenes keep the union of shape footprints constant over
time: a shape is either static or belongs to a group of identical
silhouettes cycling through fixed, disjoint slots. Under that policy the
warp of any ground-truth region by the ground-truth flow equals the region
in the next frame exactly, including the background (whose flow is pinned
to zero). Hand-built scenes may move shapes freely; the shape regions stay
exact but the background then gains pixels no flow vector points at.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import PipelineConfig
from .errors import UnsatisfiableParamsError
from .flow import FlowField, flow_file_name, warp_mask, write_flow
from .mask import iou, rle_encode

SHAPE_KINDS = ("rectangle", "disk", "ring")
BACKGROUND_ID = "background"


def _rectangle(params: Dict) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    h, w = int(params["h"]), int(params["w"])
    if h < 2 or w < 2:
        raise ValueError(f"rectangle sides must be >= 2, got {h}x{w}")
    sil = np.ones((h, w), dtype=bool)
    cols = np.arange(w)[None, :]
    left = sil & (cols < w // 2)
    return sil, {"left": left, "right": sil & ~left}


def _disk(params: Dict) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    r = int(params["r"])
    if r < 1:
        raise ValueError(f"disk radius must be >= 1, got {r}")
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    sil = xx * xx + yy * yy <= r * r
    left = sil & (xx < 0)
    return sil, {"left": left, "right": sil & ~left}


def _ring(params: Dict) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    r_in, r_out = int(params["r_in"]), int(params["r_out"])
    if not 1 <= r_in < r_out:
        raise ValueError(f"ring radii must satisfy 1 <= r_in < r_out, got {r_in}, {r_out}")
    yy, xx = np.mgrid[-r_out : r_out + 1, -r_out : r_out + 1]
    d2 = xx * xx + yy * yy
    sil = (d2 >= r_in * r_in) & (d2 <= r_out * r_out)
    top = sil & (yy < 0)
    return sil, {"top": top, "bottom": sil & ~top}


_BUILDERS = {"rectangle": _rectangle, "disk": _disk, "ring": _ring}


def build_silhouette(kind: str, params: Dict) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Materialize a shape kind as (silhouette, named part decomposition)."""
    if kind not in _BUILDERS:
        raise ValueError(f"unknown shape kind {kind!r}, expected one of {SHAPE_KINDS}")
    sil, parts = _BUILDERS[kind](params)
    union = np.zeros_like(sil)
    for name, part in parts.items():
        if not part.any():
            raise ValueError(f"part {name!r} of a {kind} is empty with params {params}")
        if (union & part).any():
            raise ValueError(f"parts of a {kind} overlap with params {params}")
        union |= part
    if not np.array_equal(union, sil):
        raise ValueError(f"parts of a {kind} do not tile it with params {params}")
    return sil, parts


@dataclass(eq=False)
class Shape:
    """One moving silhouette: per-frame top-left positions plus a part
    decomposition shared by every frame."""

    shape_id: str
    kind: str
    params: Dict
    silhouette: np.ndarray
    parts: Dict[str, np.ndarray]
    positions: Tuple[Tuple[int, int], ...]

    def velocity(self, t: int) -> Tuple[int, int]:
        """Integer (vx, vy) carrying the shape from frame t-1 into frame t."""
        x0, y0 = self.positions[t - 2]
        x1, y1 = self.positions[t - 1]
        return x1 - x0, y1 - y0


def make_shape(
    shape_id: str, kind: str, params: Dict, positions: Sequence[Tuple[int, int]]
) -> Shape:
    sil, parts = build_silhouette(kind, params)
    return Shape(
        shape_id=shape_id,
        kind=kind,
        params=dict(params),
        silhouette=sil,
        parts=parts,
        positions=tuple((int(x), int(y)) for x, y in positions),
    )


class SyntheticScene:
    """Immutable clip description exposing frames, regions, tracks, flows.

    Frames are indexed 1..frame_count throughout.
    """

    def __init__(self, height: int, width: int, frame_count: int, shapes: Sequence[Shape], seed: int = 0):
        if frame_count < 2:
            raise ValueError(f"frame_count must be >= 2, got {frame_count}")
        if height < 1 or width < 1:
            raise ValueError(f"dims must be positive, got {height}x{width}")
        self.height = int(height)
        self.width = int(width)
        self.frame_count = int(frame_count)
        self.shapes = list(shapes)
        self.seed = int(seed)
        self._region_cache: Dict[int, List[Tuple[str, np.ndarray]]] = {}
        self._validate()

    def _validate(self) -> None:
        seen = set()
        for shape in self.shapes:
            if shape.shape_id in seen:
                raise ValueError(f"duplicate shape_id {shape.shape_id!r}")
            seen.add(shape.shape_id)
            if len(shape.positions) != self.frame_count:
                raise ValueError(
                    f"{shape.shape_id}: {len(shape.positions)} positions for {self.frame_count} frames"
                )
            sh, sw = shape.silhouette.shape
            for t0, (x0, y0) in enumerate(shape.positions):
                if x0 < 0 or y0 < 0 or x0 + sw > self.width or y0 + sh > self.height:
                    raise ValueError(
                        f"{shape.shape_id} leaves the frame at t={t0 + 1}: pos ({x0}, {y0})"
                    )
        for t in range(1, self.frame_count + 1):
            count = np.zeros((self.height, self.width), dtype=np.int16)
            for shape in self.shapes:
                count += self.shape_mask(shape, t)
            if (count > 1).any():
                raise ValueError(f"shapes overlap at frame {t}")

    def shape_mask(self, shape: Shape, t: int) -> np.ndarray:
        x0, y0 = shape.positions[t - 1]
        sh, sw = shape.silhouette.shape
        out = np.zeros((self.height, self.width), dtype=bool)
        out[y0 : y0 + sh, x0 : x0 + sw] = shape.silhouette
        return out

    def _part_mask(self, shape: Shape, part: str, t: int) -> np.ndarray:
        x0, y0 = shape.positions[t - 1]
        sh, sw = shape.silhouette.shape
        out = np.zeros((self.height, self.width), dtype=bool)
        out[y0 : y0 + sh, x0 : x0 + sw] = shape.parts[part]
        return out

    def regions(self, t: int) -> List[Tuple[str, np.ndarray]]:
        """All ground-truth regions of frame t: per shape the whole then its
        parts, then the background, in a fixed order."""
        if not 1 <= t <= self.frame_count:
            raise ValueError(f"frame {t} outside 1..{self.frame_count}")
        if t not in self._region_cache:
            out: List[Tuple[str, np.ndarray]] = []
            union = np.zeros((self.height, self.width), dtype=bool)
            for shape in self.shapes:
                whole = self.shape_mask(shape, t)
                union |= whole
                out.append((shape.shape_id, whole))
                for part in shape.parts:
                    out.append((f"{shape.shape_id}.{part}", self._part_mask(shape, part, t)))
            out.append((BACKGROUND_ID, ~union))
            self._region_cache[t] = out
        return self._region_cache[t]

    def region_ids(self) -> List[str]:
        return [rid for rid, _ in self.regions(1)]

    def region_mask(self, region_id: str, t: int) -> np.ndarray:
        for rid, mask in self.regions(t):
            if rid == region_id:
                return mask
        raise KeyError(f"unknown region {region_id!r}")

    def region_track(self, region_id: str) -> Dict[int, np.ndarray]:
        return {t: self.region_mask(region_id, t) for t in range(1, self.frame_count + 1)}

    def label_map(self, t: int) -> np.ndarray:
        """Per-pixel whole-shape labels, 0 = background, shape i -> i + 1."""
        out = np.zeros((self.height, self.width), dtype=np.uint8)
        for i, shape in enumerate(self.shapes):
            out[self.shape_mask(shape, t)] = i + 1
        return out

    def flow(self, t: int) -> FlowField:
        """Exact field F_{t-1 -> t}; background pixels carry zero flow."""
        if not 2 <= t <= self.frame_count:
            raise ValueError(f"flow frame {t} outside 2..{self.frame_count}")
        dx = np.zeros((self.height, self.width), dtype=np.float32)
        dy = np.zeros((self.height, self.width), dtype=np.float32)
        for shape in self.shapes:
            vx, vy = shape.velocity(t)
            prev = self.shape_mask(shape, t - 1)
            dx[prev] = vx
            dy[prev] = vy
        return FlowField(dx, dy)

    def frame_name(self, t: int) -> str:
        return f"frame_{t:04d}.pgm"

    def frame_names(self) -> List[str]:
        return [self.frame_name(t) for t in range(1, self.frame_count + 1)]

    def to_dict(self) -> Dict:
        return {
            "height": self.height,
            "width": self.width,
            "frame_count": self.frame_count,
            "seed": self.seed,
            "shapes": [
                {
                    "shape_id": s.shape_id,
                    "kind": s.kind,
                    "params": s.params,
                    "positions": [list(p) for p in s.positions],
                }
                for s in self.shapes
            ],
        }

    def gt_manifest(self, clip_id: str) -> Dict:
        """Ground-truth clip manifest with honestly recomputed step IoUs."""
        from .store import EPOCH_TS, SCHEMA_VERSION, new_audit_event

        flows = {t: self.flow(t) for t in range(2, self.frame_count + 1)}
        tracks = []
        for rid in self.region_ids():
            entries = []
            prev: Optional[np.ndarray] = None
            for t in range(1, self.frame_count + 1):
                cur = self.region_mask(rid, t)
                entry = {"frame_index": t, "mask": rle_encode(cur), "source": "auto"}
                if t >= 2:
                    entry["step_iou"] = iou(warp_mask(prev, flows[t]), cur)
                entries.append(entry)
                prev = cur
            tracks.append({"track_id": rid, "status": "auto", "frames": entries})
        return {
            "schema_version": SCHEMA_VERSION,
            "clip_id": clip_id,
            "dims": [self.height, self.width],
            "frames": self.frame_names(),
            "config": PipelineConfig(seed=self.seed).to_dict(),
            "flow_source": "exact",
            "tracks": tracks,
            "audit": [
                new_audit_event("synthworld", "created", {"clip_id": clip_id}, EPOCH_TS)
            ],
        }


def _has_solid_block(mask: np.ndarray) -> bool:
    """True when the mask contains a fully-foreground 2x2 block, which
    guarantees an even point grid with cell size >= 2 lands on it."""
    if mask.shape[0] < 2 or mask.shape[1] < 2:
        return False
    return bool((mask[:-1, :-1] & mask[1:, :-1] & mask[:-1, 1:] & mask[1:, 1:]).any())


def _sample_silhouette(rng: np.random.Generator) -> Tuple[str, Dict]:
    kind = str(rng.choice(SHAPE_KINDS))
    if kind == "rectangle":
        params = {"h": int(rng.integers(4, 13)), "w": int(rng.integers(4, 13))}
    elif kind == "disk":
        params = {"r": int(rng.integers(3, 7))}
    else:
        r_in = int(rng.integers(2, 4))
        params = {"r_in": r_in, "r_out": r_in + int(rng.integers(2, 4))}
    return kind, params


def _sample_slot(
    rng: np.random.Generator,
    box: Tuple[int, int],
    dims: Tuple[int, int],
    taken: List[Tuple[int, int, int, int]],
    margin: int = 2,
    tries: int = 40,
) -> Optional[Tuple[int, int]]:
    sh, sw = box
    h, w = dims
    if w - sw - margin < margin or h - sh - margin < margin:
        return None
    for _ in range(tries):
        x0 = int(rng.integers(margin, w - sw - margin + 1))
        y0 = int(rng.integers(margin, h - sh - margin + 1))
        if all(
            x0 + sw <= tx or tx + tw <= x0 or y0 + sh <= ty or ty + th <= y0
            for tx, ty, tw, th in taken
        ):
            return x0, y0
    return None


def generate_clip(
    dims: Tuple[int, int] = (64, 64),
    frame_count: int = 10,
    shape_count: int = 3,
    seed: int = 0,
    retry_cap: int = 200,
) -> SyntheticScene:
    """Sample a reproducible scene under the union-constant motion policy.

    Raises:
        UnsatisfiableParamsError: when no placement fits within the retry cap.
    """
    if frame_count < 2:
        raise ValueError(f"frame_count must be >= 2, got {frame_count}")
    if shape_count < 1:
        raise ValueError(f"shape_count must be >= 1, got {shape_count}")
    h, w = int(dims[0]), int(dims[1])
    rng = np.random.default_rng(seed)
    for _ in range(retry_cap):
        scene = _try_generate((h, w), frame_count, shape_count, seed, rng)
        if scene is not None:
            return scene
    raise UnsatisfiableParamsError(
        f"could not place {shape_count} shapes in {h}x{w} after {retry_cap} attempts"
    )


def _try_generate(
    dims: Tuple[int, int],
    frame_count: int,
    shape_count: int,
    seed: int,
    rng: np.random.Generator,
) -> Optional[SyntheticScene]:
    h, w = dims
    if shape_count >= 3:
        cycle_size = int(rng.choice([0, 2, 3], p=[0.3, 0.4, 0.3]))
    elif shape_count == 2:
        cycle_size = int(rng.choice([0, 2], p=[0.4, 0.6]))
    else:
        cycle_size = 0

    # Cycling members share one silhouette; every static shape gets its own.
    kinds_params: List[Tuple[str, Dict]] = []
    shared = _sample_silhouette(rng) if cycle_size else None
    for i in range(shape_count):
        kinds_params.append(shared if i < cycle_size else _sample_silhouette(rng))

    built = []
    for kind, params in kinds_params:
        sil, parts = build_silhouette(kind, params)
        if not all(_has_solid_block(p) for p in parts.values()):
            return None
        built.append((kind, params, sil))

    taken: List[Tuple[int, int, int, int]] = []
    slots: List[Tuple[int, int]] = []
    for kind, params, sil in built:
        slot = _sample_slot(rng, sil.shape, (h, w), taken)
        if slot is None:
            return None
        slots.append(slot)
        taken.append((slot[0], slot[1], sil.shape[1], sil.shape[0]))

    shapes = []
    cycle_slots = slots[:cycle_size]
    for i, (kind, params, _sil) in enumerate(built):
        if i < cycle_size:
            positions = [
                cycle_slots[(i + t) % cycle_size] for t in range(frame_count)
            ]
        else:
            positions = [slots[i]] * frame_count
        shapes.append(make_shape(f"shape{i}", kind, params, positions))
    return SyntheticScene(h, w, frame_count, shapes, seed=seed)


def write_pgm(labels: np.ndarray, path) -> None:
    """Write a uint8 label map as binary (P5) PGM."""
    arr = np.asarray(labels, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError(f"label map must be 2-D, got shape {arr.shape}")
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens: List[bytes] = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        # header tokens are whitespace separated; '#' starts a comment line
        if data[i : i + 1].isspace():
            i += 1
            continue
        if data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM: {path}")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ValueError(f"16-bit PGM not supported: {path}")
    body = data[i + 1 : i + 1 + h * w]
    if len(body) < h * w:
        raise ValueError(f"PGM payload short: {path}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def materialize_scene(scene: SyntheticScene, out_dir, clip_id: Optional[str] = None) -> Path:
    """Write a scene to disk: scene.json, PGM label-map frames, MGFL flows,
    and the ground-truth manifest gt.mug.json. Returns the clip directory."""
    from .store import save_manifest

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cid = clip_id or out.name
    (out / "scene.json").write_text(json.dumps(scene.to_dict(), indent=2) + "\n")
    for t in range(1, scene.frame_count + 1):
        write_pgm(scene.label_map(t), out / scene.frame_name(t))
    for t in range(2, scene.frame_count + 1):
        write_flow(scene.flow(t), out / flow_file_name(t - 1, t))
    save_manifest(scene.gt_manifest(cid), out / "gt.mug.json")
    return out


def load_scene(clip_dir) -> SyntheticScene:
    """Rebuild a scene from the scene.json written by materialize_scene."""
    spec = json.loads((Path(clip_dir) / "scene.json").read_text())
    shapes = [
        make_shape(s["shape_id"], s["kind"], s["params"], [tuple(p) for p in s["positions"]])
        for s in spec["shapes"]
    ]
    return SyntheticScene(
        spec["height"], spec["width"], spec["frame_count"], shapes, seed=spec.get("seed", 0)
    )
