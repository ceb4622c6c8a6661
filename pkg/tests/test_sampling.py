import numpy as np
import pytest

from masktrack.errors import EmptyMaskError
from masktrack.sampling import Point, grid_points, kmeans_points, sample_points, uniform_points

from conftest import mask_from_strings
from oracles import best_two_partition


def fg_set(mask):
    ys, xs = np.nonzero(mask)
    return {(float(x), float(y)) for x, y in zip(xs, ys)}


def test_uniform_points_land_on_foreground(rng):
    m = mask_from_strings([
        "....#",
        ".##..",
        ".##..",
    ])
    pts = uniform_points(m, 4, rng)
    assert len(pts) == 4
    assert {(p.x, p.y) for p in pts} <= fg_set(m)


def test_uniform_without_replacement_when_n_fits():
    m = mask_from_strings(["###", "#.."])
    pts = uniform_points(m, 4, np.random.default_rng(7))
    assert len({(p.x, p.y) for p in pts}) == 4


def test_uniform_with_replacement_when_n_exceeds_area():
    m = mask_from_strings(["#.", ".#"])
    pts = uniform_points(m, 5, np.random.default_rng(0))
    assert len(pts) == 5
    assert {(p.x, p.y) for p in pts} <= {(0.0, 0.0), (1.0, 1.0)}


def test_uniform_empty_mask_raises():
    with pytest.raises(EmptyMaskError) as exc_info:
        uniform_points(np.zeros((3, 3), dtype=bool), 1, np.random.default_rng(0))
    assert exc_info.value.code == "EMPTY_MASK"


def test_uniform_is_seed_deterministic():
    m = mask_from_strings(["#####", "#####"])
    a = uniform_points(m, 3, np.random.default_rng(42))
    b = uniform_points(m, 3, np.random.default_rng(42))
    assert a == b


def test_kmeans_single_pixel_forced_centroid():
    m = np.zeros((6, 6), dtype=bool)
    m[3, 2] = True  # x=2, y=3
    assert kmeans_points(m, 1, np.random.default_rng(0)) == [Point(2.0, 3.0)]


def test_kmeans_two_far_pairs_snap_one_per_cluster():
    """k=2 on pixels {(0,0),(0,1),(10,10),(10,11)} (x,y).

    The exhaustive 2-partition oracle confirms the variance-minimizing split
    is pair-vs-pair; the snapped representatives must land one in each pair.
    """
    m = np.zeros((12, 12), dtype=bool)
    for x, y in [(0, 0), (0, 1), (10, 10), (10, 11)]:
        m[y, x] = True
    oracle_a, oracle_b = best_two_partition([(0, 0), (0, 1), (10, 10), (10, 11)])
    assert {oracle_a, oracle_b} == {
        frozenset({(0.0, 0.0), (0.0, 1.0)}),
        frozenset({(10.0, 10.0), (10.0, 11.0)}),
    }
    for seed in range(5):
        pts = kmeans_points(m, 2, np.random.default_rng(seed))
        got = {(p.x, p.y) for p in pts}
        assert len(got) == 2
        assert len(got & {(0.0, 0.0), (0.0, 1.0)}) == 1
        assert len(got & {(10.0, 10.0), (10.0, 11.0)}) == 1


def test_kmeans_k_at_least_foreground_returns_all_pixels_row_major():
    m = mask_from_strings([
        ".#.",
        "#.#",
    ])
    pts = kmeans_points(m, 5, np.random.default_rng(1))
    assert pts == [Point(1.0, 0.0), Point(0.0, 1.0), Point(2.0, 1.0)]


def test_kmeans_points_are_distinct_and_on_mask(rng):
    m = np.zeros((20, 20), dtype=bool)
    m[2:8, 2:8] = True
    m[12:18, 12:18] = True
    pts = kmeans_points(m, 6, rng)
    assert len(pts) == 6
    coords = {(p.x, p.y) for p in pts}
    assert len(coords) == 6
    assert coords <= fg_set(m)


def test_kmeans_empty_mask_raises():
    with pytest.raises(EmptyMaskError):
        kmeans_points(np.zeros((2, 2), dtype=bool), 2, np.random.default_rng(0))


def test_grid_2x2_on_4x4_image():
    pts = grid_points(4, 4, 2)
    assert pts == [
        Point(1.0, 1.0),
        Point(3.0, 1.0),
        Point(1.0, 3.0),
        Point(3.0, 3.0),
    ]


def test_grid_centers_are_fractional_on_odd_sizes():
    pts = grid_points(3, 3, 3)
    xs = sorted({p.x for p in pts})
    assert xs == [0.5, 1.5, 2.5]
    assert len(pts) == 9


def test_grid_row_major_order():
    pts = grid_points(8, 8, 2)
    assert [(p.x, p.y) for p in pts] == [(2, 2), (6, 2), (2, 6), (6, 6)]


def test_grid_rejects_bad_per_side():
    with pytest.raises(ValueError):
        grid_points(4, 4, 0)


def test_dispatcher_strategies():
    m = mask_from_strings(["##", "##"])
    assert sample_points(m, 2, "grid") == grid_points(2, 2, 2)
    uni = sample_points(m, 3, "uniform-random", seed=5)
    assert uni == uniform_points(m, 3, np.random.default_rng(5))
    km = sample_points(m, 1, "kmeans", seed=5)
    assert km == kmeans_points(m, 1, np.random.default_rng(5))
    with pytest.raises(ValueError):
        sample_points(m, 2, "sobol")
