"""Point-prompt sampling strategies over binary masks."""

from __future__ import annotations

from typing import List, NamedTuple, Optional

import numpy as np

from .errors import EmptyMaskError
from .mask import as_mask


class Point(NamedTuple):
    """Image-plane coordinate; x is the column, y the row, both may be
    fractional."""

    x: float
    y: float


def uniform_points(mask, n: int, rng: np.random.Generator) -> List[Point]:
    """Sample ``n`` foreground pixel centers.

    Sampling is without replacement while ``n`` fits in the foreground, with
    replacement beyond that so the requested count is always honored.

    Raises:
        EmptyMaskError: when the mask has no foreground.
    """
    m = as_mask(mask)
    ys, xs = np.nonzero(m)
    if ys.size == 0:
        raise EmptyMaskError("cannot sample points from an empty mask")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    idx = rng.choice(ys.size, size=n, replace=bool(n > ys.size))
    return [Point(float(xs[i]), float(ys[i])) for i in idx]


def kmeans_points(mask, k: int, rng: np.random.Generator) -> List[Point]:
    """Cluster foreground pixel coordinates with Lloyd's algorithm and return
    one representative pixel per cluster.

    Initialization is k-means++ driven by ``rng``. Each final centroid is
    snapped to the nearest pixel of its own cluster, ties broken by smallest
    (y, x), so every returned point lies on the mask and points are distinct.
    When ``k`` meets or exceeds the foreground size, all foreground pixels
    are returned in row-major order.

    Raises:
        EmptyMaskError: when the mask has no foreground.
    """
    m = as_mask(mask)
    ys, xs = np.nonzero(m)
    if ys.size == 0:
        raise EmptyMaskError("cannot cluster an empty mask")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    pts = np.stack([xs, ys], axis=1).astype(float)
    if k >= len(pts):
        return [Point(float(x), float(y)) for x, y in pts]

    centers = _kmeans_pp_init(pts, k, rng)
    assign = np.zeros(len(pts), dtype=int)
    for _ in range(100):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        # Re-seed any emptied cluster with the point farthest from all centers.
        for j in range(k):
            if not np.any(assign == j):
                assign[int(d2.min(axis=1).argmax())] = j
        new_centers = np.array([pts[assign == j].mean(axis=0) for j in range(k)])
        if np.allclose(new_centers, centers):
            centers = new_centers
            break
        centers = new_centers

    out: List[Point] = []
    for j in range(k):
        members = pts[assign == j]
        d2m = ((members - centers[j]) ** 2).sum(axis=1)
        best = np.lexsort((members[:, 0], members[:, 1], d2m))[0]
        out.append(Point(float(members[best, 0]), float(members[best, 1])))
    return out


def _kmeans_pp_init(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [pts[int(rng.integers(len(pts)))]]
    d2 = ((pts - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total == 0:
            nxt = int(rng.integers(len(pts)))
        else:
            nxt = int(rng.choice(len(pts), p=d2 / total))
        centers.append(pts[nxt])
        d2 = np.minimum(d2, ((pts - pts[nxt]) ** 2).sum(axis=1))
    return np.array(centers)


def grid_points(height: int, width: int, per_side: int) -> List[Point]:
    """Cell centers of an even ``per_side`` x ``per_side`` partition of the
    image, row-major order."""
    if per_side < 1:
        raise ValueError(f"per_side must be >= 1, got {per_side}")
    out: List[Point] = []
    for i in range(per_side):
        y = (i + 0.5) * height / per_side
        for j in range(per_side):
            out.append(Point((j + 0.5) * width / per_side, y))
    return out


def sample_points(
    mask,
    n: int,
    strategy: str = "uniform-random",
    seed: int = 0,
    per_side: Optional[int] = None,
) -> List[Point]:
    """Strategy dispatcher used by callers that configure sampling by name.

    ``uniform-random`` and ``kmeans`` sample on the mask foreground;
    ``grid`` ignores the mask contents and tiles its dimensions with
    ``per_side`` (default ``n``) points per side.
    """
    if strategy in ("uniform-random", "uniform"):
        return uniform_points(mask, n, np.random.default_rng(seed))
    if strategy == "kmeans":
        return kmeans_points(mask, n, np.random.default_rng(seed))
    if strategy == "grid":
        m = as_mask(mask)
        side = per_side if per_side is not None else n
        return grid_points(m.shape[0], m.shape[1], side)
    raise ValueError(f"unknown sampling strategy: {strategy!r}")
