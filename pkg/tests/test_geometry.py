import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerforge.geometry import (
    BBox,
    CanvasSize,
    GridRegion,
    PlacementProblem,
    area,
    assign_grid_region,
    center_distance,
    clamp_to_canvas,
    contains,
    giou,
    intersect_area,
    iou,
    iter_positions,
    overlap_ratio,
    place_layer,
    quantize_box,
    region_rank,
)

CANVAS = CanvasSize(1024, 1024)


def boxes_strategy(limit=1024):
    return st.tuples(
        st.integers(0, limit - 1), st.integers(0, limit - 1),
        st.integers(1, limit), st.integers(1, limit),
    ).map(
        lambda t: BBox(min(t[0], t[2] - 1), min(t[1], t[3] - 1),
                       max(t[0] + 1, t[2]), max(t[1] + 1, t[3]))
    )


class TestBoxAlgebra:
    def test_area(self):
        assert area(BBox(0, 0, 1, 1)) == 1
        assert area(BBox(0, 0, 16, 16)) == 256
        assert area(BBox(10, 20, 110, 220)) == 20000

    def test_intersect_area(self):
        b = BBox(3, 4, 10, 12)
        assert intersect_area(b, b) == area(b)
        assert intersect_area(BBox(0, 0, 2, 2), BBox(5, 5, 7, 7)) == 0
        assert intersect_area(BBox(0, 0, 2, 2), BBox(1, 1, 3, 3)) == 1

    def test_iou(self):
        b = BBox(1, 1, 9, 9)
        assert iou(b, b) == 1.0
        assert iou(BBox(0, 0, 2, 2), BBox(4, 4, 6, 6)) == 0.0
        assert iou(BBox(0, 0, 2, 2), BBox(1, 1, 3, 3)) == pytest.approx(1 / 7)

    def test_giou(self):
        b = BBox(2, 3, 8, 9)
        assert giou(b, b) == 1.0
        assert giou(BBox(0, 0, 1, 1), BBox(2, 0, 3, 1)) == pytest.approx(-1 / 3)
        assert giou(BBox(0, 0, 2, 2), BBox(1, 1, 3, 3)) == pytest.approx(
            1 / 7 - 2 / 9
        )

    @given(boxes_strategy(), boxes_strategy())
    def test_ranges_and_degenerate_to_iou(self, a, b):
        assert 0.0 <= iou(a, b) <= 1.0
        g = giou(a, b)
        assert -1.0 <= g <= 1.0
        assert g <= iou(a, b) + 1e-12
        if contains(a, b) or contains(b, a):
            # enclosure equals the union, so the penalty term vanishes
            assert g == pytest.approx(iou(a, b))

    def test_center_distance(self):
        b = BBox(10, 10, 20, 20)
        assert center_distance(b, b, CANVAS) == (0.0, 0.0)
        a = BBox(-1, -1, 1, 1)  # center (0, 0)
        c = BBox(2, 3, 4, 5)  # center (3, 4)
        px, _ = center_distance(a, c, CANVAS)
        assert px == pytest.approx(5.0)

    def test_center_distance_normalization_uses_diagonal(self):
        px = 3.66
        norm = px / math.hypot(1024, 1024)
        assert f"{norm:.2g}" == "0.0025"
        a = BBox(0, 0, 10, 10)
        b = BBox(3, 4, 13, 14)
        d, n = center_distance(a, b, CANVAS)
        assert n == pytest.approx(d / math.hypot(1024, 1024))


class TestQuantizeBox:
    def test_examples(self):
        assert quantize_box(BBox(0, 0, 1024, 1024), CANVAS) == BBox(0, 0, 1024, 1024)
        assert quantize_box(BBox(5, 10, 100, 200), CANVAS) == BBox(0, 0, 112, 208)
        assert quantize_box(BBox(16, 32, 48, 64), CANVAS) == BBox(16, 32, 48, 64)

    @given(boxes_strategy())
    def test_aligned_and_containing(self, b):
        q = quantize_box(b, CANVAS)
        assert all(v % 16 == 0 for v in q)
        assert contains(q, b)
        assert area(q) >= area(b)


class TestClampToCanvas:
    def test_clamps_and_drops_degenerate(self):
        assert clamp_to_canvas(BBox(-5, 10, 2000, 500), CANVAS) == BBox(0, 10, 1024, 500)
        assert clamp_to_canvas(BBox(-10, -10, -1, 5), CANVAS) is None
        assert clamp_to_canvas(BBox(1030, 0, 1040, 10), CANVAS) is None


class TestGridRegion:
    def test_center_of_canvas(self):
        assert assign_grid_region(BBox(412, 412, 612, 612), CANVAS) == GridRegion.CENTER

    def test_top_left(self):
        assert assign_grid_region(BBox(0, 0, 100, 100), CANVAS) == GridRegion.TOP_LEFT

    def test_clamped_at_the_edge(self):
        assert assign_grid_region(BBox(1023, 0, 1024, 20), CANVAS) == GridRegion.TOP_RIGHT
        assert assign_grid_region(BBox(0, 1004, 1024, 1024), CANVAS) == GridRegion.BOTTOM

    def test_reading_order_ranks(self):
        order = [
            GridRegion.TOP_LEFT, GridRegion.TOP, GridRegion.TOP_RIGHT,
            GridRegion.LEFT, GridRegion.CENTER, GridRegion.RIGHT,
            GridRegion.BOTTOM_LEFT, GridRegion.BOTTOM, GridRegion.BOTTOM_RIGHT,
        ]
        assert [region_rank(r) for r in order] == list(range(9))

    @given(st.integers(1, 1023), st.integers(1, 1023), st.integers(1, 6))
    def test_partition_and_scale_invariance(self, cx, cy, k):
        b = BBox(cx - 1, cy - 1, cx + 1, cy + 1)
        region = assign_grid_region(b, CANVAS)
        scaled = BBox(k * (cx - 1), k * (cy - 1), k * (cx + 1), k * (cy + 1))
        big = CanvasSize(1024 * k, 1024 * k)
        assert assign_grid_region(scaled, big) == region


def brute_force_min_overlap(problem: PlacementProblem) -> int:
    """Independent oracle: rasterize occupancy counts, use an integral image
    to score every position, return the global minimum total intersection."""
    w, h = problem.layer_size
    cw, ch = problem.canvas
    grid = np.zeros((ch, cw), dtype=np.int64)
    for b in problem.occupied:
        grid[b.y0 : b.y1, b.x0 : b.x1] += 1
    integral = np.zeros((ch + 1, cw + 1), dtype=np.int64)
    integral[1:, 1:] = grid.cumsum(0).cumsum(1)
    best = None
    for y in range(ch - h + 1):
        for x in range(cw - w + 1):
            total = (
                integral[y + h, x + w]
                - integral[y, x + w]
                - integral[y + h, x]
                + integral[y, x]
            )
            best = total if best is None else min(best, total)
    return int(best)


class TestPlaceLayer:
    def test_empty_occupancy_returns_first_candidate(self):
        problem = PlacementProblem((10, 10), [], CanvasSize(100, 100), 300)
        rng = np.random.default_rng(123)
        x, y = place_layer(problem, rng)
        replay = np.random.default_rng(123)
        xs = replay.integers(0, 91, size=300)
        ys = replay.integers(0, 91, size=300)
        assert (x, y) == (int(xs[0]), int(ys[0]))

    def test_saturated_canvas_returns_first_candidate(self):
        canvas = CanvasSize(100, 100)
        problem = PlacementProblem((50, 100), [BBox(0, 0, 100, 100)], canvas, 300)
        rng = np.random.default_rng(7)
        x, y = place_layer(problem, rng)
        replay = np.random.default_rng(7)
        xs = replay.integers(0, 51, size=300)
        assert (x, y) == (int(xs[0]), 0)
        assert overlap_ratio(BBox(x, y, x + 50, y + 100), problem.occupied) == 1.0

    def test_exhaustive_grid_finds_unique_zero_overlap(self):
        canvas = CanvasSize(100, 100)
        problem = PlacementProblem((50, 100), [BBox(0, 0, 50, 100)], canvas, 300)
        x, y = place_layer(problem, candidates=iter_positions(problem))
        assert (x, y) == (50, 0)

    def test_sampled_result_no_worse_than_any_candidate(self):
        rng = np.random.default_rng(99)
        occupied = [BBox(0, 0, 30, 30), BBox(40, 10, 64, 50)]
        problem = PlacementProblem((20, 20), occupied, CanvasSize(64, 64), 64)
        x, y = place_layer(problem, np.random.default_rng(5))
        score = overlap_ratio(BBox(x, y, x + 20, y + 20), occupied)
        replay = np.random.default_rng(5)
        xs = replay.integers(0, 45, size=64)
        ys = replay.integers(0, 45, size=64)
        for cx, cy in zip(xs, ys):
            cand = BBox(int(cx), int(cy), int(cx) + 20, int(cy) + 20)
            assert score <= overlap_ratio(cand, occupied) + 1e-12

    def test_layer_too_large_raises(self):
        problem = PlacementProblem((65, 10), [], CanvasSize(64, 64), 10)
        with pytest.raises(ValueError):
            place_layer(problem, np.random.default_rng(0))

    def test_exhaustive_matches_brute_force_oracle(self):
        rng = np.random.default_rng(314)
        for _ in range(100):
            cw = int(rng.integers(16, 65))
            ch = int(rng.integers(16, 65))
            canvas = CanvasSize(cw, ch)
            w = int(rng.integers(1, cw + 1))
            h = int(rng.integers(1, ch + 1))
            occupied = []
            for _ in range(int(rng.integers(0, 6))):
                bw = int(rng.integers(1, cw + 1))
                bh = int(rng.integers(1, ch + 1))
                bx = int(rng.integers(0, cw - bw + 1))
                by = int(rng.integers(0, ch - bh + 1))
                occupied.append(BBox(bx, by, bx + bw, by + bh))
            problem = PlacementProblem((w, h), occupied, canvas, 300)
            x, y = place_layer(problem, candidates=iter_positions(problem))
            achieved = sum(
                intersect_area(BBox(x, y, x + w, y + h), b) for b in occupied
            )
            assert achieved == brute_force_min_overlap(problem)
