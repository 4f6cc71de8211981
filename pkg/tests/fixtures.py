"""Scripted behavior fixtures shared by the simulator and acceptance tests.

Expected outcomes were computed with the naive per-pixel oracle before the
engine existed and are frozen in the tests that use these.
"""

from interest_miner.engine import BoundingBox, ImageMeta
from interest_miner.simulator import BehaviorScript, Phase

IMAGE = ImageMeta("demo", 64, 64)
FULL = BoundingBox(0, 0, 64, 64)


def dweller_script() -> BehaviorScript:
    """Tiles the ROI [16,48)^2 with four 16x16 viewports after a full-image
    glance.  Oracle: every ROI cell gets one equal credit -> mask == ROI,
    recovery jaccard exactly 1.0 (threshold mean = 0.25)."""
    tiles = [
        Phase(BoundingBox(x, y, x + 16, y + 16), 800) for y in (16, 32) for x in (16, 32)
    ]
    return BehaviorScript(
        seed=1,
        image=IMAGE,
        planted_rois=(BoundingBox(16, 16, 48, 48),),
        phases=(Phase(FULL, 100), *tiles),
    )


def scanner_script() -> BehaviorScript:
    """Sweeps the whole image with equal 16x16 viewports and equal dwells.
    Oracle: uniform positive grid -> normalized all 1.0 -> strict > mean
    empties the mask -> degenerate zero."""
    tiles = [
        Phase(BoundingBox(x, y, x + 16, y + 16), 500)
        for y in range(0, 64, 16)
        for x in range(0, 64, 16)
    ]
    return BehaviorScript(
        seed=2,
        image=IMAGE,
        planted_rois=(BoundingBox(0, 0, 32, 32),),
        phases=tuple(tiles),
    )


def two_roi_script() -> BehaviorScript:
    """Dwells 800ms on ROI A = [4,20)^2 and 200ms on ROI B = [40,56)^2 with
    equal 16x16 viewports.  Oracle: normalized values {1.0, 0.25}, mean
    0.078125 -> both ROIs exceed it -> mask == A | B."""
    a, b = BoundingBox(4, 4, 20, 20), BoundingBox(40, 40, 56, 56)
    return BehaviorScript(
        seed=3,
        image=IMAGE,
        planted_rois=(a, b),
        phases=(Phase(FULL, 100), Phase(a, 800), Phase(b, 200)),
    )
