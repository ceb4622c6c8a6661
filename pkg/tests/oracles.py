"""Independent reference implementations used to cross-check the library.

Everything here is deliberately written with plain Python loops and set
arithmetic, sharing no code path with src/. Slow is fine; agreeing with a
different derivation is the point.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np


def pixel_set(mask) -> set:
    """Foreground coordinates as a set of (row, col) tuples."""
    return {(int(r), int(c)) for r, c in zip(*np.nonzero(np.asarray(mask, dtype=bool)))}


def iou_oracle(a, b) -> float:
    sa, sb = pixel_set(a), pixel_set(b)
    union = sa | sb
    if not union:
        return 1.0
    return len(sa & sb) / len(union)


def boundary_pixels(mask) -> set:
    """Foreground pixels with a 4-neighbour that is background or off-image."""
    arr = np.asarray(mask, dtype=bool)
    h, w = arr.shape
    fg = pixel_set(arr)
    out = set()
    for r, c in fg:
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if not (0 <= rr < h and 0 <= cc < w) or (rr, cc) not in fg:
                out.add((r, c))
                break
    return out


def _matched_fraction(points: set, targets: set, tolerance: float) -> float:
    tol_sq = int(round(tolerance)) ** 2 if float(tolerance).is_integer() else tolerance**2
    hits = 0
    for r, c in points:
        best = min((r - tr) ** 2 + (c - tc) ** 2 for tr, tc in targets)
        if best <= tol_sq:
            hits += 1
    return hits / len(points)


def boundary_f_oracle(pred, gt, tolerance: float) -> float:
    """All-pairs boundary matching; exact integer distances for integer tolerance."""
    pb, gb = boundary_pixels(pred), boundary_pixels(gt)
    if not pb and not gb:
        return 1.0
    if not pb or not gb:
        return 0.0
    precision = _matched_fraction(pb, gb, tolerance)
    recall = _matched_fraction(gb, pb, tolerance)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def rle_counts_oracle(mask) -> list:
    """Row-major run lengths starting with background, by walking every pixel."""
    arr = np.asarray(mask, dtype=bool)
    flat = arr.reshape(-1)
    counts = []
    current = False  # runs always start with background
    run = 0
    for value in flat:
        if bool(value) == current:
            run += 1
        else:
            counts.append(run)
            current = bool(value)
            run = 1
    counts.append(run)
    return counts


def best_two_partition(points) -> tuple:
    """Exhaustive split of points into two nonempty clusters minimizing SSE."""
    pts = [tuple(map(float, p)) for p in points]
    n = len(pts)
    best = None
    best_cost = None
    indices = range(n)
    for size in range(1, n // 2 + 1):
        for group in combinations(indices, size):
            a = [pts[i] for i in group]
            b = [pts[i] for i in indices if i not in group]
            cost = _sse(a) + _sse(b)
            if best_cost is None or cost < best_cost:
                best_cost = cost
                best = (frozenset(a), frozenset(b))
    return best


def _sse(cluster) -> float:
    cx = sum(p[0] for p in cluster) / len(cluster)
    cy = sum(p[1] for p in cluster) / len(cluster)
    return sum((p[0] - cx) ** 2 + (p[1] - cy) ** 2 for p in cluster)
