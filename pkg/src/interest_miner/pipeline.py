"""Analysis pipeline shared by the HTTP service and the CLI.

Everything here is a pure function of the stored logs plus configuration, and
all JSON serialization funnels through :func:`to_json_bytes`, so the service
response for an analysis request is byte-identical to the CLI's file output
for the same data.  Payloads carry a schema tag so clients can detect format
changes.
"""

from __future__ import annotations

import base64
import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .engine import (
    HeatMap,
    ImageMeta,
    InterestAccumulator,
    RegionMask,
    aggregate_users,
    render_rgba,
    threshold_mask,
    upsample,
)
from .storage import EventStore, ImageRegistry, StreamKey, StreamNotFoundError
from .validation import (
    MarkSet,
    build_report,
    overlay,
    rasterize,
    score_user,
    sweep_threshold,
)

HEATMAP_SCHEMA = "interest-miner/heatmap/v1"
VALIDATION_SCHEMA = "interest-miner/validation/v1"
RECOVERY_SCHEMA = "interest-miner/recovery/v1"


def to_json_bytes(payload: dict) -> bytes:
    """Canonical JSON encoding: compact separators, insertion order, UTF-8."""
    return json.dumps(payload, separators=(",", ":"), ensure_ascii=False).encode()


def rle_encode_rows(bits: np.ndarray) -> list[list[int]]:
    """Per-row run lengths, alternating and starting with the zero run.

    ``[0,0,1,1,1,0] -> [2,3,1]``; an all-zero row encodes as ``[width]`` and
    a row starting with ones gets a leading 0.
    """
    rows = []
    for row in np.asarray(bits, dtype=bool):
        runs: list[int] = []
        value = False
        n = 0
        for bit in row:
            if bit == value:
                n += 1
            else:
                runs.append(n)
                value = bit
                n = 1
        runs.append(n)
        rows.append(runs)
    return rows


def rle_decode_rows(rows: list[list[int]], width: int) -> np.ndarray:
    out = np.zeros((len(rows), width), dtype=bool)
    for y, runs in enumerate(rows):
        x = 0
        value = False
        for n in runs:
            if value:
                out[y, x : x + n] = True
            x += n
            value = not value
    return out


def png_bytes(rgba: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(rgba, "RGBA").save(buf, format="PNG")
    return buf.getvalue()


# -- per-user runs ------------------------------------------------------------


@dataclass(frozen=True)
class UserRun:
    user_id: str
    heatmap: HeatMap
    max_interest: float
    event_count: int


def run_user(store: EventStore, key: StreamKey, meta: ImageMeta, scale: int) -> UserRun:
    acc = InterestAccumulator(meta, scale)
    records = store.replay(key)
    for record in records:
        acc.add_event(record.event)
    return UserRun(key.user_id, acc.get_heatmap(), acc.max_interest, len(records))


def image_runs(
    store: EventStore,
    registry: ImageRegistry,
    test_id: str,
    image_id: str,
    scale: int,
    user_id: str | None = None,
) -> tuple[ImageMeta, list[UserRun]]:
    """Engine runs for every user stream of the image, ordered by user id."""
    meta = registry.require(image_id)
    if user_id is not None:
        key = StreamKey(test_id, image_id, user_id)
        if not store.has_events(key):
            raise StreamNotFoundError(f"no events for user {user_id!r}")
        return meta, [run_user(store, key, meta, scale)]
    keys = store.list_streams(test_id, image_id)
    if not keys:
        raise StreamNotFoundError(f"no event streams for image {image_id!r}")
    return meta, [run_user(store, key, meta, scale) for key in keys]


def combined_heatmap(runs: list[UserRun]) -> HeatMap:
    if len(runs) == 1:
        return runs[0].heatmap
    return aggregate_users([run.heatmap for run in runs])


# -- heat map payloads ---------------------------------------------------------


def _heatmap_analysis(
    store: EventStore,
    registry: ImageRegistry,
    test_id: str,
    image_id: str,
    scale: int,
    user_id: str | None,
    threshold: float | None,
    fmt: str,
) -> tuple[HeatMap, dict]:
    if fmt not in ("grid", "raster"):
        raise ValueError(f"unknown format {fmt!r}")
    meta, runs = image_runs(store, registry, test_id, image_id, scale, user_id)
    hm = combined_heatmap(runs)
    cut = hm.threshold if threshold is None else threshold
    mask = threshold_mask(hm, cut)
    payload = {
        "schema": HEATMAP_SCHEMA,
        "test_id": test_id,
        "image_id": image_id,
        "width": meta.width,
        "height": meta.height,
        "scale": scale,
        "mode": "single" if user_id is not None else "aggregate",
        "users": [run.user_id for run in runs],
        "user_count": len(runs),
        "event_count": sum(run.event_count for run in runs),
        "max_interest": max(run.max_interest for run in runs),
        "threshold": cut,
        "threshold_source": "override" if threshold is not None else "mean",
        "grid_width": hm.values.shape[1],
        "grid_height": hm.values.shape[0],
        "mask_rle": rle_encode_rows(mask.bits),
    }
    if fmt == "grid":
        payload["grid"] = [[float(v) for v in row] for row in hm.values]
    else:
        payload["raster_png_base64"] = base64.b64encode(png_bytes(render_rgba(hm))).decode()
    return hm, payload


def heatmap_payload(
    store: EventStore,
    registry: ImageRegistry,
    test_id: str,
    image_id: str,
    scale: int,
    user_id: str | None = None,
    threshold: float | None = None,
    fmt: str = "grid",
) -> dict:
    """Heat map + mask payload, ``fmt`` "grid" (numeric) or "raster" (base64 PNG)."""
    return _heatmap_analysis(
        store, registry, test_id, image_id, scale, user_id, threshold, fmt
    )[1]


def write_heatmap_files(
    store: EventStore,
    registry: ImageRegistry,
    test_id: str,
    image_id: str,
    scale: int,
    out_dir: str | Path,
    user_id: str | None = None,
    threshold: float | None = None,
) -> dict[str, Path]:
    """Render heatmap.png, heatmap.json, and the key-value metadata sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    hm, payload = _heatmap_analysis(
        store, registry, test_id, image_id, scale, user_id, threshold, "grid"
    )
    png_path = out_dir / "heatmap.png"
    png_path.write_bytes(png_bytes(render_rgba(hm)))
    json_path = out_dir / "heatmap.json"
    json_path.write_bytes(to_json_bytes(payload))
    sidecar = out_dir / "heatmap.meta.txt"
    sidecar.write_text(
        "".join(
            f"{k}={payload[k]}\n"
            for k in ("image_id", "user_count", "max_interest", "threshold", "scale")
        )
    )
    return {"png": png_path, "json": json_path, "meta": sidecar}


# -- validation payloads -------------------------------------------------------


def eligible_users(store: EventStore, test_id: str, image_id: str) -> list[StreamKey]:
    """Users with both an event stream and a non-empty marks submission."""
    return [
        key for key in store.list_streams(test_id, image_id) if store.has_marks(key)
    ]


def validation_payload(
    store: EventStore,
    registry: ImageRegistry,
    test_id: str,
    image_id: str,
    scale: int,
    threshold: float | None = None,
    sweep: list[float] | None = None,
    overlay_refs: bool = True,
    full_res: bool = False,
) -> dict:
    """Per-user Jaccard report with image-level min/avg/max statistics."""
    meta = registry.require(image_id)
    keys = eligible_users(store, test_id, image_id)
    if not keys:
        raise StreamNotFoundError(
            f"no user of image {image_id!r} has both events and marks"
        )
    entries = []
    sweeps = {}
    for key in keys:
        run = run_user(store, key, meta, scale)
        marks = MarkSet(meta, tuple(store.latest_marks(key)))
        entries.append(score_user(key.user_id, run.heatmap, marks, threshold, full_res))
        if sweep:
            result = sweep_threshold(run.heatmap, marks, sweep)
            sweeps[key.user_id] = {
                "points": [[t, j] for t, j in result.points],
                "best_threshold": result.best_threshold,
                "best_jaccard": result.best_jaccard,
            }
    report = build_report(entries, scale)
    payload = {
        "schema": VALIDATION_SCHEMA,
        "test_id": test_id,
        "image_id": image_id,
        "scale": scale,
        "resolution": "full" if full_res and scale > 1 else "grid",
        "threshold_source": "override" if threshold is not None else "mean",
        "per_user": [
            {
                "user_id": e.user_id,
                "jaccard": e.jaccard,
                "mask_pixels": e.mask_pixels,
                "mark_pixels": e.mark_pixels,
                "intersection_pixels": e.intersection_pixels,
                "threshold": e.threshold,
                "degenerate": e.degenerate,
                "degenerate_reason": e.degenerate_reason,
                "overlay": f"renders/{test_id}/{image_id}/{e.user_id}.overlay.png"
                if overlay_refs
                else None,
            }
            for e in report.per_user
        ],
        "per_image": {
            "min": report.min_jaccard,
            "avg": report.avg_jaccard,
            "max": report.max_jaccard,
            "variance": report.variance,
        },
    }
    if sweeps:
        payload["sweep"] = sweeps
    return payload


def render_overlays(
    store: EventStore,
    registry: ImageRegistry,
    test_id: str,
    image_id: str,
    scale: int,
    out_root: str | Path,
    threshold: float | None = None,
    base_image: np.ndarray | None = None,
) -> list[Path]:
    """Write one red/green/yellow overlay PNG per eligible user.

    Overlays land at full image resolution (masks nearest-neighbor upsampled);
    without a base image they blend onto a white canvas.
    """
    meta = registry.require(image_id)
    out_dir = Path(out_root) / "renders" / test_id / image_id
    out_dir.mkdir(parents=True, exist_ok=True)
    if base_image is None:
        base_image = np.full((meta.height, meta.width, 3), 255, dtype=np.uint8)
    written = []
    for key in eligible_users(store, test_id, image_id):
        run = run_user(store, key, meta, scale)
        cut = run.heatmap.threshold if threshold is None else threshold
        mask = threshold_mask(run.heatmap, cut)
        marks = rasterize(MarkSet(meta, tuple(store.latest_marks(key))), scale)
        full_mask = RegionMask(meta, 1, upsample(mask.bits, meta, scale))
        full_marks = RegionMask(meta, 1, upsample(marks.bits, meta, scale))
        blended = overlay(full_mask, full_marks, base_image)
        path = out_dir / f"{key.user_id}.overlay.png"
        buf = io.BytesIO()
        Image.fromarray(blended, "RGB").save(buf, format="PNG")
        path.write_bytes(buf.getvalue())
        written.append(path)
    return written


def figure_table_csv(reports: list[dict]) -> str:
    """Per-image min/avg/max/variance table for a bar-chart rendering."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["image_id", "users", "min_jaccard", "avg_jaccard", "max_jaccard", "variance"])
    for report in reports:
        stats = report["per_image"]
        writer.writerow(
            [
                report["image_id"],
                len(report["per_user"]),
                stats["min"],
                stats["avg"],
                stats["max"],
                stats["variance"],
            ]
        )
    return buf.getvalue()
