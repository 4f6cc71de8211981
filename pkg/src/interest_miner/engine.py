"""Viewport-interest accumulation engine.

Each viewport event credits the dwell time spent on the *previous* viewport,
weighted by how far that viewport is from showing the whole image: a user who
zooms deep into a small region and lingers there piles up interest on exactly
those pixels, while staring at the full image contributes nothing.  Raw
interest accumulates in pixel*ms units on a per-(user, image) grid; reads
normalize the grid to a [0, 1] heat map whose above-average cells form the
binary relevance mask.

Accumulation uses a 2-D difference array: an event touches four corner cells
regardless of its viewport size, and a single prefix-sum pass materializes the
dense grid at read time.  That keeps ingest O(1) per event and reads
O(grid cells).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class OrderViolationError(ValueError):
    """Timestamp went backwards within a stream."""


class EventKind(str, Enum):
    ZOOM = "zoom"
    PAN = "pan"
    SESSION_END = "session_end"
    MARK = "mark"


@dataclass(frozen=True, slots=True)
class ImageMeta:
    image_id: str
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be >= 1, got {self.width}x{self.height}")


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned pixel rectangle, half-open: [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self) -> None:
        if self.x0 < 0 or self.y0 < 0 or self.x0 >= self.x1 or self.y0 >= self.y1:
            raise ValueError(f"degenerate bounding box ({self.x0},{self.y0},{self.x1},{self.y1})")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height


def clamp_bbox(x0: int, y0: int, x1: int, y1: int, meta: ImageMeta) -> BoundingBox | None:
    """Clamp raw corner coordinates to the image; None if nothing remains."""
    cx0 = max(0, min(x0, meta.width))
    cy0 = max(0, min(y0, meta.height))
    cx1 = max(0, min(x1, meta.width))
    cy1 = max(0, min(y1, meta.height))
    if cx0 >= cx1 or cy0 >= cy1:
        return None
    return BoundingBox(cx0, cy0, cx1, cy1)


@dataclass(frozen=True, slots=True)
class ViewportEvent:
    kind: EventKind
    t: int
    bbox: BoundingBox | None = None

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError(f"negative timestamp {self.t}")
        if self.kind is EventKind.SESSION_END:
            if self.bbox is not None:
                raise ValueError("session_end events carry no bounding box")
        elif self.bbox is None:
            raise ValueError(f"{self.kind.value} events require a bounding box")


@dataclass(frozen=True)
class HeatMap:
    """Normalized interest values at grid resolution, plus the mask cutoff."""

    meta: ImageMeta
    scale: int
    values: np.ndarray  # (grid_h, grid_w) float64 in [0, 1]
    threshold: float


@dataclass(frozen=True)
class RegionMask:
    meta: ImageMeta
    scale: int
    bits: np.ndarray  # (grid_h, grid_w) bool


def grid_shape(meta: ImageMeta, scale: int) -> tuple[int, int]:
    """(rows, cols) of the interest grid: ceil(height/scale) x ceil(width/scale)."""
    return (-(-meta.height // scale), -(-meta.width // scale))


def get_interest(prev: ViewportEvent, nxt: ViewportEvent, meta: ImageMeta) -> float:
    """Interest (pixel*ms) credited to prev's viewport for the dwell until nxt.

    The mean of the two dimension gaps between viewport and image, times the
    dwell time: a full-image viewport scores zero no matter how long the user
    sits on it.
    """
    if prev.bbox is None:
        raise ValueError("previous event carries no viewport")
    if nxt.t < prev.t:
        raise OrderViolationError(f"timestamp {nxt.t} precedes previous event at {prev.t}")
    area_diff = abs(meta.width - prev.bbox.width) + abs(meta.height - prev.bbox.height)
    return (area_diff / 2.0) * (nxt.t - prev.t)


def cell_spans(
    bbox: BoundingBox, meta: ImageMeta, scale: int
) -> list[tuple[int, int, int, int]]:
    """Grid-cell rectangles (gy0, gy1, gx0, gx1) covered by a pixel bbox.

    At scale 1 this is the bbox itself.  At coarser scales a cell counts when
    the bbox overlaps at least half of the cell's area (ties included); the
    qualifying cells form at most three row strips because coverage fractions
    only vary at the edge rows/columns.  All comparisons are exact integer
    arithmetic: 2*overlap_x*overlap_y >= cell_w*cell_h.
    """
    if scale == 1:
        return [(bbox.y0, bbox.y1, bbox.x0, bbox.x1)]

    def axis_parts(lo: int, hi: int, limit: int) -> list[tuple[int, int, int, int]]:
        # (first_cell, last_cell_inclusive, overlap, cell_extent) per segment
        c_lo, c_hi = lo // scale, (hi - 1) // scale

        def edge(c: int) -> tuple[int, int, int, int]:
            cell_lo = c * scale
            cell_hi = min(cell_lo + scale, limit)
            return (c, c, min(hi, cell_hi) - max(lo, cell_lo), cell_hi - cell_lo)

        if c_lo == c_hi:
            return [edge(c_lo)]
        parts = [edge(c_lo)]
        if c_hi > c_lo + 1:
            # interior cells are fully covered and never clipped by the image
            parts.append((c_lo + 1, c_hi - 1, scale, scale))
        parts.append(edge(c_hi))
        return parts

    cols = axis_parts(bbox.x0, bbox.x1, meta.width)
    spans = []
    for r0, r1, oy, ch in axis_parts(bbox.y0, bbox.y1, meta.height):
        lo = hi = None
        for c0, c1, ox, cw in cols:
            if 2 * ox * oy >= cw * ch:
                lo = c0 if lo is None else lo
                hi = c1
        if lo is not None:
            spans.append((r0, r1 + 1, lo, hi + 1))
    return spans


class InterestAccumulator:
    """Mutable per-(user, image) interest grid fed by Algorithm-style events.

    Single writer: events must arrive in timestamp order.  Reads (``grid``,
    ``max_interest``, ``get_heatmap``) materialize lazily and may not run
    concurrently with ``add_event``.
    """

    def __init__(self, meta: ImageMeta, scale: int = 1) -> None:
        if scale < 1:
            raise ValueError(f"scale must be >= 1, got {scale}")
        self.meta = meta
        self.scale = scale
        self.grid_height, self.grid_width = grid_shape(meta, scale)
        self._diff = np.zeros((self.grid_height + 1, self.grid_width + 1), dtype=np.float64)
        self._grid: np.ndarray | None = np.zeros((self.grid_height, self.grid_width))
        self.prev_event: ViewportEvent | None = None
        self._last_t = 0
        self.events_applied = 0

    def add_event(self, event: ViewportEvent) -> None:
        if event.kind is EventKind.MARK:
            raise ValueError("mark records are not viewport events")
        if event.t < self._last_t:
            raise OrderViolationError(
                f"timestamp {event.t} precedes stream tail at {self._last_t}"
            )
        prev = self.prev_event
        if prev is not None and prev.bbox is not None:
            interest = get_interest(prev, event, self.meta)
            if interest > 0.0:
                d = self._diff
                for gy0, gy1, gx0, gx1 in cell_spans(prev.bbox, self.meta, self.scale):
                    d[gy0, gx0] += interest
                    d[gy0, gx1] -= interest
                    d[gy1, gx0] -= interest
                    d[gy1, gx1] += interest
                self._grid = None
        self.prev_event = None if event.kind is EventKind.SESSION_END else event
        self._last_t = event.t
        self.events_applied += 1

    @property
    def grid(self) -> np.ndarray:
        """Dense interest grid (pixel*ms). Materialized from the diff array."""
        if self._grid is None:
            g = np.cumsum(self._diff[: self.grid_height, : self.grid_width], axis=0)
            np.cumsum(g, axis=1, out=g)
            self._grid = g
        return self._grid

    @property
    def max_interest(self) -> float:
        return float(self.grid.max()) if self.grid.size else 0.0

    def get_heatmap(self) -> HeatMap:
        """Max-normalize the grid; threshold is the mean over all cells."""
        grid = self.grid
        peak = self.max_interest
        values = grid / peak if peak > 0.0 else np.zeros_like(grid)
        return HeatMap(
            meta=self.meta,
            scale=self.scale,
            values=values,
            threshold=float(values.mean()),
        )


def threshold_mask(hm: HeatMap, threshold: float | None = None) -> RegionMask:
    """Cells strictly above the cutoff (the heat map's own by default)."""
    cut = hm.threshold if threshold is None else threshold
    return RegionMask(meta=hm.meta, scale=hm.scale, bits=hm.values > cut)


def aggregate_users(maps: list[HeatMap]) -> HeatMap:
    """Cell-wise mean of per-user maps, min-max rescaled to span [0, 1]."""
    if not maps:
        raise ValueError("nothing to aggregate")
    first = maps[0]
    for m in maps[1:]:
        if m.values.shape != first.values.shape or m.scale != first.scale:
            raise ValueError("heat map dimensions disagree")
    mean = np.mean([m.values for m in maps], axis=0)
    lo, hi = float(mean.min()), float(mean.max())
    values = (mean - lo) / (hi - lo) if hi > lo else np.zeros_like(mean)
    return HeatMap(
        meta=first.meta,
        scale=first.scale,
        values=values,
        threshold=float(values.mean()),
    )


def upsample(values: np.ndarray, meta: ImageMeta, scale: int) -> np.ndarray:
    """Nearest-neighbor expansion of a grid-resolution array to image size."""
    if scale == 1:
        return values
    out = np.repeat(np.repeat(values, scale, axis=0), scale, axis=1)
    return out[: meta.height, : meta.width]


def render_rgba(hm: HeatMap) -> np.ndarray:
    """Full-resolution RGBA buffer: red, alpha = value/2 of full opacity.

    Alpha is round-half-up of value*127, so a saturated cell lands on 127
    (50% opacity) and untouched cells stay fully transparent.
    """
    values = upsample(hm.values, hm.meta, hm.scale)
    out = np.zeros((hm.meta.height, hm.meta.width, 4), dtype=np.uint8)
    out[values > 0.0, 0] = 255
    out[..., 3] = np.floor(values * 127.0 + 0.5).astype(np.uint8)
    return out
