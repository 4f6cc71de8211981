"""Deterministic synthetic-user traces with planted ground-truth regions.

A behavior script is an explicit list of (viewport, dwell) steps, optionally
perturbed by seeded jitter; it generates the exact event stream a scripted
user would produce, terminated by session_end.  Recovery scoring runs the
generated trace through the engine and measures how well the thresholded mask
recovers the planted regions, which stands in for a human cohort at desk
scale.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .engine import (
    BoundingBox,
    EventKind,
    ImageMeta,
    InterestAccumulator,
    ViewportEvent,
    clamp_bbox,
    threshold_mask,
)
from .validation import MarkSet, jaccard_stats, rasterize


@dataclass(frozen=True, slots=True)
class Phase:
    bbox: BoundingBox
    dwell_ms: int

    def __post_init__(self) -> None:
        if self.dwell_ms < 0:
            raise ValueError("dwell must be >= 0")


@dataclass(frozen=True)
class BehaviorScript:
    seed: int
    image: ImageMeta
    planted_rois: tuple[BoundingBox, ...]
    phases: tuple[Phase, ...]
    dwell_jitter_ms: int = 0
    bbox_jitter_px: int = 0

    def __post_init__(self) -> None:
        for box in list(self.planted_rois) + [p.bbox for p in self.phases]:
            if box.x1 > self.image.width or box.y1 > self.image.height:
                raise ValueError(f"{box} exceeds image bounds")


def generate(script: BehaviorScript) -> list[ViewportEvent]:
    """Event list for the script: one event per phase plus session_end.

    Timestamps are cumulative dwells.  A phase whose viewport area differs
    from the previous viewport's (the full image, for the first phase) emits a
    zoom, an equal-area move emits a pan.  Jitter draws from a generator
    seeded by the script, so equal scripts yield identical traces.
    """
    rng = random.Random(script.seed)
    meta = script.image
    events: list[ViewportEvent] = []
    t = 0
    prev_area = meta.width * meta.height
    for phase in script.phases:
        box = phase.bbox
        if script.bbox_jitter_px:
            j = script.bbox_jitter_px
            dx, dy = rng.randint(-j, j), rng.randint(-j, j)
            box = clamp_bbox(box.x0 + dx, box.y0 + dy, box.x1 + dx, box.y1 + dy, meta) or box
        kind = EventKind.ZOOM if box.area != prev_area else EventKind.PAN
        events.append(ViewportEvent(kind, t, box))
        dwell = phase.dwell_ms
        if script.dwell_jitter_ms:
            dwell = max(0, dwell + rng.randint(-script.dwell_jitter_ms, script.dwell_jitter_ms))
        t += dwell
        prev_area = box.area
    events.append(ViewportEvent(EventKind.SESSION_END, t))
    return events


@dataclass(frozen=True)
class RecoveryReport:
    jaccard: float
    mask_pixels: int
    roi_pixels: int
    intersection_pixels: int
    degenerate: bool
    degenerate_reason: str | None


def recovery_score(
    script: BehaviorScript, scale: int = 1, threshold: float | None = None
) -> RecoveryReport:
    """Generate, accumulate, threshold, and score against the planted regions."""
    if not script.planted_rois:
        raise ValueError("script plants no regions to recover")
    acc = InterestAccumulator(script.image, scale)
    for event in generate(script):
        acc.add_event(event)
    mask = threshold_mask(acc.get_heatmap(), threshold)
    rois = rasterize(MarkSet(script.image, script.planted_rois), scale)
    stats = jaccard_stats(mask, rois)
    if stats.a_pixels == 0 and stats.b_pixels == 0:
        reason = "empty_both"
    elif stats.a_pixels == 0:
        reason = "empty_mask"
    elif stats.b_pixels == 0:
        reason = "empty_marks"
    else:
        reason = None
    return RecoveryReport(
        jaccard=stats.value,
        mask_pixels=stats.a_pixels,
        roi_pixels=stats.b_pixels,
        intersection_pixels=stats.intersection,
        degenerate=reason is not None,
        degenerate_reason=reason,
    )


# -- script / suite files ---------------------------------------------------


@dataclass(frozen=True)
class SuiteEntry:
    user_id: str
    script: BehaviorScript


@dataclass(frozen=True)
class Suite:
    test_id: str
    entries: tuple[SuiteEntry, ...] = field(default_factory=tuple)


class SuiteParseError(ValueError):
    """Unusable suite file; the message carries location context."""


def _rect(raw, meta_hint="rectangle") -> BoundingBox:
    if not (isinstance(raw, list) and len(raw) == 4):
        raise SuiteParseError(f"{meta_hint} must be [x0, y0, x1, y1], got {raw!r}")
    try:
        return BoundingBox(*(int(v) for v in raw))
    except (TypeError, ValueError) as exc:
        raise SuiteParseError(f"bad {meta_hint} {raw!r}: {exc}") from exc


def script_from_dict(raw: dict, where: str = "script") -> BehaviorScript:
    try:
        image = raw["image"]
        meta = ImageMeta(str(image["image_id"]), int(image["width"]), int(image["height"]))
        phases = tuple(
            Phase(_rect(p["bbox"], f"{where} phase {i} bbox"), int(p["dwell_ms"]))
            for i, p in enumerate(raw.get("phases", []))
        )
        return BehaviorScript(
            seed=int(raw.get("seed", 0)),
            image=meta,
            planted_rois=tuple(
                _rect(r, f"{where} planted roi") for r in raw.get("planted_rois", [])
            ),
            phases=phases,
            dwell_jitter_ms=int(raw.get("dwell_jitter_ms", 0)),
            bbox_jitter_px=int(raw.get("bbox_jitter_px", 0)),
        )
    except KeyError as exc:
        raise SuiteParseError(f"{where}: missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SuiteParseError):
            raise
        raise SuiteParseError(f"{where}: {exc}") from exc


def load_suite(path: str | Path) -> Suite:
    """Parse a JSON suite file; errors carry line numbers where available."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SuiteParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict) or "test_id" not in raw:
        raise SuiteParseError(f"{path}: suite needs a top-level test_id")
    entries = []
    for i, entry in enumerate(raw.get("users", [])):
        if "user_id" not in entry:
            raise SuiteParseError(f"{path}: users[{i}] is missing user_id")
        entries.append(
            SuiteEntry(str(entry["user_id"]), script_from_dict(entry, f"users[{i}]"))
        )
    if not entries:
        raise SuiteParseError(f"{path}: suite has no users")
    return Suite(test_id=str(raw["test_id"]), entries=tuple(entries))
