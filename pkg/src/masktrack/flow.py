"""Dense displacement fields, warping, and the flow file format.

A flow field maps pixel p in frame t-1 to p + (dx[p], dy[p]) in frame t.
Files use a small binary container: the ASCII magic "MGFL", little-endian
u32 height and width, then H*W records of two little-endian f32 values
(dx, dy) in row-major order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .errors import (
    BadMagicError,
    DimensionMismatchError,
    FlowUnavailableError,
    NonFiniteValueError,
    TruncatedFileError,
)
from .mask import as_mask
from .sampling import Point

MAGIC = b"MGFL"
_HEADER = struct.Struct("<II")


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement field with finite float32 components."""

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        dx = np.asarray(self.dx, dtype=np.float32)
        dy = np.asarray(self.dy, dtype=np.float32)
        if dx.ndim != 2 or dx.shape != dy.shape:
            raise ValueError(f"dx/dy must be matching 2-D arrays, got {dx.shape} and {dy.shape}")
        if not (np.isfinite(dx).all() and np.isfinite(dy).all()):
            raise NonFiniteValueError("flow components must be finite")
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dy", dy)

    @property
    def height(self) -> int:
        return self.dx.shape[0]

    @property
    def width(self) -> int:
        return self.dx.shape[1]

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width), np.float32), np.zeros((height, width), np.float32))


def warp_points(
    points: Sequence[Point],
    flow: FlowField,
    dims: Optional[Tuple[int, int]] = None,
) -> List[Point]:
    """Displace each point by the flow at its nearest integer pixel.

    Results are clamped into [0, W-1] x [0, H-1] so the point count never
    changes; input order is preserved. ``dims``, when given, declares the
    frame dimensions and must match the flow.

    Raises:
        DimensionMismatchError: when ``dims`` disagrees with the flow shape.
    """
    h, w = flow.height, flow.width
    if dims is not None and (dims[0] != h or dims[1] != w):
        raise DimensionMismatchError(f"frame dims {dims} do not match flow dims ({h}, {w})")
    out: List[Point] = []
    for p in points:
        xi = min(max(int(np.floor(p.x + 0.5)), 0), w - 1)
        yi = min(max(int(np.floor(p.y + 0.5)), 0), h - 1)
        nx = p.x + float(flow.dx[yi, xi])
        ny = p.y + float(flow.dy[yi, xi])
        out.append(Point(min(max(nx, 0.0), float(w - 1)), min(max(ny, 0.0), float(h - 1))))
    return out


def warp_mask(mask, flow: FlowField, close_holes: bool = False) -> np.ndarray:
    """Forward-splat a mask through the flow.

    Every foreground pixel p lights up round(p + flow(p)) in the output when
    that lands in bounds. Exact for integer flows; ``close_holes`` applies a
    3x3 binary closing for expansive real-world flows and is off by default.

    Raises:
        DimensionMismatchError: when mask and flow dims differ.
    """
    m = as_mask(mask)
    if m.shape != (flow.height, flow.width):
        raise DimensionMismatchError(f"mask shape {m.shape} does not match flow dims ({flow.height}, {flow.width})")
    ys, xs = np.nonzero(m)
    tx = np.floor(xs + flow.dx[ys, xs] + 0.5).astype(np.int64)
    ty = np.floor(ys + flow.dy[ys, xs] + 0.5).astype(np.int64)
    keep = (tx >= 0) & (tx < m.shape[1]) & (ty >= 0) & (ty < m.shape[0])
    out = np.zeros_like(m)
    out[ty[keep], tx[keep]] = True
    if close_holes:
        out = ndimage.binary_closing(out, structure=np.ones((3, 3), bool))
    return out


def write_flow(flow: FlowField, path) -> None:
    """Serialize a flow field; see the module docstring for the layout."""
    rec = np.empty((flow.height, flow.width, 2), dtype="<f4")
    rec[..., 0] = flow.dx
    rec[..., 1] = flow.dy
    Path(path).write_bytes(MAGIC + _HEADER.pack(flow.height, flow.width) + rec.tobytes())


def read_flow(path) -> FlowField:
    """Deserialize a flow field.

    Raises:
        BadMagicError: wrong leading magic bytes.
        TruncatedFileError: file shorter than the header-declared payload.
        NonFiniteValueError: the payload carries NaN or infinity.
    """
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"not a flow file: {path}")
    body = data[len(MAGIC):]
    if len(body) < _HEADER.size:
        raise TruncatedFileError(f"flow file header incomplete: {path}")
    h, w = _HEADER.unpack_from(body)
    need = _HEADER.size + h * w * 8
    if len(body) < need:
        raise TruncatedFileError(f"flow file payload short: {path} has {len(body) - _HEADER.size} of {h * w * 8} bytes")
    rec = np.frombuffer(body[_HEADER.size:need], dtype="<f4").reshape(h, w, 2)
    return FlowField(np.ascontiguousarray(rec[..., 0]), np.ascontiguousarray(rec[..., 1]))


def flow_file_name(t_prev: int, t: int) -> str:
    """On-disk name for the field carrying frame t_prev into frame t."""
    return f"flow_{t_prev}_{t}.mgfl"


def directory_flow_lookup(directory) -> Callable[[int, int], FlowField]:
    """Flow provider reading ``flow_{t-1}_{t}.mgfl`` files from a directory.

    The returned callable raises FlowUnavailableError naming the frame pair
    when the file is missing.
    """
    base = Path(directory)

    def lookup(t_prev: int, t: int) -> FlowField:
        path = base / flow_file_name(t_prev, t)
        if not path.exists():
            raise FlowUnavailableError(f"no flow for frame pair ({t_prev}, {t}): missing {path}")
        return read_flow(path)

    return lookup
