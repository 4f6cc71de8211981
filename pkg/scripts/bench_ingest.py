#!/usr/bin/env python3
"""Ingest/render scaling measurement.

Feeds doubling event counts into one large accumulator and prints ingest and
render wall times.  Ingest should scale linearly with the event count while
render stays flat (it only depends on the grid size).
"""

import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from interest_miner.engine import (
    BoundingBox,
    EventKind,
    ImageMeta,
    InterestAccumulator,
    ViewportEvent,
    render_rgba,
)

SIDE = 4096
COUNTS = (125_000, 250_000, 500_000, 1_000_000)


def make_events(n, rng):
    events, t = [], 0
    for _ in range(n):
        t += rng.randint(0, 50)
        x0, y0 = rng.randrange(SIDE - 512), rng.randrange(SIDE - 512)
        box = BoundingBox(x0, y0, x0 + rng.randint(1, 512), y0 + rng.randint(1, 512))
        events.append(ViewportEvent(EventKind.ZOOM, t, box))
    return events


def main() -> None:
    meta = ImageMeta("bench", SIDE, SIDE)
    events = make_events(max(COUNTS), random.Random(42))
    print(f"{'events':>10} {'ingest_s':>9} {'evt/s':>12} {'render_s':>9}")
    for count in COUNTS:
        acc = InterestAccumulator(meta)
        started = time.perf_counter()
        for event in events[:count]:
            acc.add_event(event)
        ingest = time.perf_counter() - started
        started = time.perf_counter()
        render_rgba(acc.get_heatmap())
        render = time.perf_counter() - started
        print(f"{count:>10} {ingest:>9.2f} {count / ingest:>12.0f} {render:>9.2f}")


if __name__ == "__main__":
    main()
