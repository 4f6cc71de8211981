"""Agreement scoring between mined masks and user-marked rectangles.

Marked rectangles rasterize to a binary mask at the engine's grid scale (same
half-open pixel semantics and, when downsampling, the same >=50% cell-coverage
rule), so thresholded heat maps and marks are compared like with like.  The
Jaccard index (intersection over union, on pixel sets) quantifies the overlap;
red/green/yellow overlays make it visible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import (
    BoundingBox,
    HeatMap,
    ImageMeta,
    RegionMask,
    cell_spans,
    grid_shape,
    threshold_mask,
    upsample,
)

RED = (255, 0, 0)
GREEN = (0, 255, 0)
YELLOW = (255, 255, 0)


@dataclass(frozen=True)
class MarkSet:
    meta: ImageMeta
    rects: tuple[BoundingBox, ...]


@dataclass(frozen=True, slots=True)
class JaccardStats:
    value: float
    intersection: int
    union: int
    a_pixels: int
    b_pixels: int
    degenerate: bool  # both masks empty: 0 by definition, not a real score


def rasterize(marks: MarkSet, scale: int = 1) -> RegionMask:
    """Union of the marked rectangles as a grid-scale binary mask."""
    bits = np.zeros(grid_shape(marks.meta, scale), dtype=bool)
    for rect in marks.rects:
        for gy0, gy1, gx0, gx1 in cell_spans(rect, marks.meta, scale):
            bits[gy0:gy1, gx0:gx1] = True
    return RegionMask(meta=marks.meta, scale=scale, bits=bits)


def jaccard_stats(a: RegionMask, b: RegionMask) -> JaccardStats:
    if a.bits.shape != b.bits.shape:
        raise ValueError(f"mask dimensions disagree: {a.bits.shape} vs {b.bits.shape}")
    intersection = int((a.bits & b.bits).sum())
    union = int((a.bits | b.bits).sum())
    return JaccardStats(
        value=intersection / union if union else 0.0,
        intersection=intersection,
        union=union,
        a_pixels=int(a.bits.sum()),
        b_pixels=int(b.bits.sum()),
        degenerate=union == 0,
    )


def jaccard(a: RegionMask, b: RegionMask) -> float:
    return jaccard_stats(a, b).value


def overlay(hm_mask: RegionMask, marks_mask: RegionMask, base: np.ndarray) -> np.ndarray:
    """Tint mined-only pixels red, marked-only green, agreement yellow.

    Tints blend into the base at 50% (integer round-half-up); untouched pixels
    pass through.  Masks and base must share height/width.
    """
    if hm_mask.bits.shape != marks_mask.bits.shape:
        raise ValueError("mask dimensions disagree")
    if base.shape[:2] != hm_mask.bits.shape:
        raise ValueError("base image dimensions disagree with masks")
    out = base.copy()
    both = hm_mask.bits & marks_mask.bits
    for region, tint in (
        (hm_mask.bits & ~marks_mask.bits, RED),
        (marks_mask.bits & ~hm_mask.bits, GREEN),
        (both, YELLOW),
    ):
        blended = (out[region, :3].astype(np.uint16) + np.array(tint, np.uint16) + 1) // 2
        out[region, :3] = blended.astype(np.uint8)
    return out


@dataclass(frozen=True)
class SweepResult:
    points: tuple[tuple[float, float], ...]  # (threshold, jaccard) per grid entry
    best_threshold: float
    best_jaccard: float


def sweep_threshold(hm: HeatMap, marks: MarkSet, grid: list[float]) -> SweepResult:
    """Jaccard across candidate thresholds; best = argmax, ties to the lowest."""
    if not grid:
        raise ValueError("threshold grid is empty")
    if any(not 0.0 <= t <= 1.0 for t in grid):
        raise ValueError("thresholds must lie in [0, 1]")
    if sorted(grid) != list(grid):
        raise ValueError("threshold grid must be sorted ascending")
    marks_mask = rasterize(marks, hm.scale)
    points = []
    best_threshold, best_jaccard = grid[0], -1.0
    for threshold in grid:
        score = jaccard(threshold_mask(hm, threshold), marks_mask)
        points.append((threshold, score))
        if score > best_jaccard:
            best_threshold, best_jaccard = threshold, score
    return SweepResult(tuple(points), best_threshold, best_jaccard)


@dataclass(frozen=True)
class UserValidation:
    user_id: str
    jaccard: float
    mask_pixels: int
    mark_pixels: int
    intersection_pixels: int
    threshold: float
    degenerate: bool
    degenerate_reason: str | None


@dataclass(frozen=True)
class ValidationReport:
    per_user: tuple[UserValidation, ...]
    min_jaccard: float
    avg_jaccard: float
    max_jaccard: float
    variance: float
    scale: int


def score_user(
    user_id: str,
    hm: HeatMap,
    marks: MarkSet,
    threshold: float | None = None,
    full_res: bool = False,
) -> UserValidation:
    """Jaccard between one user's thresholded heat map and their marks.

    By default both sides live at the heat map's grid scale.  With
    ``full_res`` the thresholded mask is nearest-neighbor expanded to image
    resolution and the marks rasterize at scale 1 instead.
    """
    cut = hm.threshold if threshold is None else threshold
    mask = threshold_mask(hm, cut)
    if full_res and hm.scale > 1:
        mask = RegionMask(hm.meta, 1, upsample(mask.bits, hm.meta, hm.scale))
        marks_mask = rasterize(marks, 1)
    else:
        marks_mask = rasterize(marks, hm.scale)
    stats = jaccard_stats(mask, marks_mask)
    if stats.a_pixels == 0 and stats.b_pixels == 0:
        reason = "empty_both"
    elif stats.a_pixels == 0:
        reason = "empty_mask"  # uniform or empty heat map: nothing above average
    elif stats.b_pixels == 0:
        reason = "empty_marks"
    else:
        reason = None
    return UserValidation(
        user_id=user_id,
        jaccard=stats.value,
        mask_pixels=stats.a_pixels,
        mark_pixels=stats.b_pixels,
        intersection_pixels=stats.intersection,
        threshold=cut,
        degenerate=reason is not None,
        degenerate_reason=reason,
    )


def build_report(entries: list[UserValidation], scale: int) -> ValidationReport:
    if not entries:
        raise ValueError("no users to report on")
    scores = np.array([e.jaccard for e in entries])
    return ValidationReport(
        per_user=tuple(entries),
        min_jaccard=float(scores.min()),
        avg_jaccard=float(scores.mean()),
        max_jaccard=float(scores.max()),
        variance=float(scores.var()),
        scale=scale,
    )
