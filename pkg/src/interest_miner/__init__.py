"""Interest mining from zoom/pan viewport interaction streams."""

from .engine import (
    BoundingBox,
    EventKind,
    HeatMap,
    ImageMeta,
    InterestAccumulator,
    OrderViolationError,
    RegionMask,
    ViewportEvent,
    aggregate_users,
    clamp_bbox,
    get_interest,
    render_rgba,
    threshold_mask,
)
from .storage import EventRecord, EventStore, ImageRegistry, StreamKey, StreamNotFoundError
from .validation import MarkSet, ValidationReport, jaccard, jaccard_stats, overlay, rasterize
from .simulator import BehaviorScript, Phase, generate, recovery_score

__version__ = "0.1.0"
