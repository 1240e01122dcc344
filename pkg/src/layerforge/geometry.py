"""Bounding-box algebra, 16-pixel quantization, 3x3 grid regions, and the
overlap-minimizing placement optimizer.

Boxes are half-open integer pixel rectangles [x0, y0, x1, y1] with
x0 < x1 and y0 < y1; they serialize in that order everywhere.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

GRID_QUANTUM = 16


class BBox(NamedTuple):
    x0: int
    y0: int
    x1: int
    y1: int


class CanvasSize(NamedTuple):
    width: int
    height: int


DEFAULT_CANVAS = CanvasSize(1024, 1024)


class GridRegion(Enum):
    """The nine coarse spatial regions of a 3x3 canvas grid."""

    TOP_LEFT = "top-left"
    TOP = "top"
    TOP_RIGHT = "top-right"
    LEFT = "left"
    CENTER = "center"
    RIGHT = "right"
    BOTTOM_LEFT = "bottom-left"
    BOTTOM = "bottom"
    BOTTOM_RIGHT = "bottom-right"


# Row-major (reading-order) layout of the grid labels.
_REGION_GRID = (
    (GridRegion.TOP_LEFT, GridRegion.TOP, GridRegion.TOP_RIGHT),
    (GridRegion.LEFT, GridRegion.CENTER, GridRegion.RIGHT),
    (GridRegion.BOTTOM_LEFT, GridRegion.BOTTOM, GridRegion.BOTTOM_RIGHT),
)

REGION_READING_ORDER = tuple(r for row in _REGION_GRID for r in row)


class PlacementProblem(NamedTuple):
    """One placement query: fit `layer_size` onto `canvas` avoiding `occupied`."""

    layer_size: tuple[int, int]
    occupied: Sequence[BBox]
    canvas: CanvasSize
    max_candidates: int = 300


def is_valid(b: BBox) -> bool:
    return b.x0 < b.x1 and b.y0 < b.y1


def area(b: BBox) -> int:
    return (b.x1 - b.x0) * (b.y1 - b.y0)


def intersect_area(a: BBox, b: BBox) -> int:
    w = min(a.x1, b.x1) - max(a.x0, b.x0)
    h = min(a.y1, b.y1) - max(a.y0, b.y0)
    if w <= 0 or h <= 0:
        return 0
    return w * h


def union_area(a: BBox, b: BBox) -> int:
    return area(a) + area(b) - intersect_area(a, b)


def iou(a: BBox, b: BBox) -> float:
    inter = intersect_area(a, b)
    return inter / (area(a) + area(b) - inter)


def enclosure(a: BBox, b: BBox) -> BBox:
    return BBox(
        min(a.x0, b.x0), min(a.y0, b.y0), max(a.x1, b.x1), max(a.y1, b.y1)
    )


def giou(a: BBox, b: BBox) -> float:
    """Generalized IoU: IoU minus the enclosure area not covered by the union."""
    enc = area(enclosure(a, b))
    return iou(a, b) - (enc - union_area(a, b)) / enc


def center(b: BBox) -> tuple[float, float]:
    return ((b.x0 + b.x1) / 2.0, (b.y0 + b.y1) / 2.0)


def center_distance(a: BBox, b: BBox, canvas: CanvasSize) -> tuple[float, float]:
    """Euclidean distance between box centers, in pixels and normalized by the
    canvas diagonal sqrt(W^2 + H^2)."""
    (ax, ay), (bx, by) = center(a), center(b)
    px = math.hypot(ax - bx, ay - by)
    return px, px / math.hypot(canvas.width, canvas.height)


def quantize_box(b: BBox, canvas: CanvasSize) -> BBox:
    """Expand a box outward to the 16-pixel grid, clamped to the canvas.

    Top-left coordinates round down, bottom-right round up, so the result
    contains the input whenever the canvas dimensions are multiples of 16.
    """
    q = GRID_QUANTUM
    return BBox(
        max((b.x0 // q) * q, 0),
        max((b.y0 // q) * q, 0),
        min(-(-b.x1 // q) * q, canvas.width),
        min(-(-b.y1 // q) * q, canvas.height),
    )


def clamp_to_canvas(b: BBox, canvas: CanvasSize) -> Optional[BBox]:
    """Clamp a box to canvas bounds; None if it degenerates to zero extent."""
    x0 = min(max(b.x0, 0), canvas.width)
    y0 = min(max(b.y0, 0), canvas.height)
    x1 = min(max(b.x1, 0), canvas.width)
    y1 = min(max(b.y1, 0), canvas.height)
    if x0 >= x1 or y0 >= y1:
        return None
    return BBox(x0, y0, x1, y1)


def contains(outer: BBox, inner: BBox) -> bool:
    return (
        outer.x0 <= inner.x0
        and outer.y0 <= inner.y0
        and outer.x1 >= inner.x1
        and outer.y1 >= inner.y1
    )


def assign_grid_region(b: BBox, canvas: CanvasSize) -> GridRegion:
    """Assign a box to one of the nine grid regions by its center point."""
    cx, cy = center(b)
    col = min(max(math.floor(3.0 * cx / canvas.width), 0), 2)
    row = min(max(math.floor(3.0 * cy / canvas.height), 0), 2)
    return _REGION_GRID[row][col]


def region_rank(region: GridRegion) -> int:
    """Reading-order rank (row-major, top-left first) of a grid region."""
    return REGION_READING_ORDER.index(region)


def overlap_ratio(box: BBox, occupied: Sequence[BBox]) -> float:
    """Total intersection with `occupied`, normalized by the box's own area."""
    return sum(intersect_area(box, k) for k in occupied) / area(box)


def iter_positions(p: PlacementProblem):
    """All integer top-left positions keeping the layer on canvas, row-major."""
    w, h = p.layer_size
    for y in range(p.canvas.height - h + 1):
        for x in range(p.canvas.width - w + 1):
            yield (x, y)


def place_layer(
    p: PlacementProblem,
    rng: Optional[np.random.Generator] = None,
    candidates: Optional[Sequence[tuple[int, int]]] = None,
) -> tuple[int, int]:
    """Pick the candidate top-left position minimizing normalized overlap.

    By default samples `p.max_candidates` positions uniformly (duplicates
    allowed) from the valid grid; pass `candidates` to force a specific set,
    e.g. `iter_positions(p)` for exhaustive search. A zero-overlap candidate
    is accepted immediately; ties break to the first candidate seen.
    """
    w, h = p.layer_size
    cw, ch = p.canvas
    if w > cw or h > ch:
        raise ValueError(f"layer {w}x{h} does not fit on canvas {cw}x{ch}")

    if candidates is None:
        if rng is None:
            raise ValueError("rng is required when sampling candidates")
        xs = rng.integers(0, cw - w + 1, size=p.max_candidates)
        ys = rng.integers(0, ch - h + 1, size=p.max_candidates)
        cand = np.stack([xs, ys], axis=1)
    else:
        cand = np.asarray(list(candidates), dtype=np.int64).reshape(-1, 2)
        if len(cand) == 0:
            raise ValueError("empty candidate set")

    if not p.occupied:
        x, y = cand[0]
        return int(x), int(y)

    occ = np.asarray([tuple(b) for b in p.occupied], dtype=np.int64)
    x0 = cand[:, 0:1]
    y0 = cand[:, 1:2]
    iw = np.minimum(x0 + w, occ[None, :, 2]) - np.maximum(x0, occ[None, :, 0])
    ih = np.minimum(y0 + h, occ[None, :, 3]) - np.maximum(y0, occ[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    totals = inter.sum(axis=1)
    # argmin returns the first occurrence, which is both the first-seen
    # tie-break and the immediate-accept rule for zero-overlap candidates.
    best = int(np.argmin(totals))
    return int(cand[best, 0]), int(cand[best, 1])
