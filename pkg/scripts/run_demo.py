#!/usr/bin/env python3
"""End-to-end demo on a synthetic cohort.

Simulates three users with different attention patterns on one image, ingests
their traces through the storage layer, and writes the heat map, validation
report, and overlays under out/demo/.  The marks each user "drew" are their
planted regions, so the validation report shows how recovery degrades from
the focused dweller to the uniform scanner.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from interest_miner.engine import BoundingBox, ImageMeta
from interest_miner.pipeline import (
    render_overlays,
    to_json_bytes,
    validation_payload,
    write_heatmap_files,
)
from interest_miner.simulator import BehaviorScript, Phase, generate
from interest_miner.storage import EventStore, ImageRegistry, StreamKey

IMAGE = ImageMeta("demo", 64, 64)
FULL = BoundingBox(0, 0, 64, 64)

COHORT = {
    "dweller": BehaviorScript(
        seed=1,
        image=IMAGE,
        planted_rois=(BoundingBox(16, 16, 48, 48),),
        phases=(
            Phase(FULL, 100),
            *(
                Phase(BoundingBox(x, y, x + 16, y + 16), 800)
                for y in (16, 32)
                for x in (16, 32)
            ),
        ),
    ),
    "wanderer": BehaviorScript(
        seed=2,
        image=IMAGE,
        planted_rois=(BoundingBox(8, 8, 24, 24),),
        phases=(
            Phase(FULL, 100),
            Phase(BoundingBox(8, 8, 24, 24), 1500),
            Phase(BoundingBox(40, 40, 56, 56), 300),
            Phase(BoundingBox(8, 8, 24, 24), 1200),
        ),
        dwell_jitter_ms=50,
    ),
    "scanner": BehaviorScript(
        seed=3,
        image=IMAGE,
        planted_rois=(BoundingBox(0, 0, 32, 32),),
        phases=tuple(
            Phase(BoundingBox(x, y, x + 16, y + 16), 500)
            for y in range(0, 64, 16)
            for x in range(0, 64, 16)
        ),
    ),
}


def main() -> None:
    root = Path(__file__).resolve().parents[1]
    data_dir, out_dir = root / "out" / "demo-data", root / "out" / "demo"
    registry = ImageRegistry(data_dir)
    registry.register(IMAGE.image_id, IMAGE.width, IMAGE.height)
    store = EventStore(data_dir)
    try:
        for user, script in COHORT.items():
            key = StreamKey("demo-test", IMAGE.image_id, user)
            store.append_batch(key, generate(script))
            store.append_marks(key, list(script.planted_rois))
            print(f"ingested {user}: {len(generate(script))} events")

        files = write_heatmap_files(
            store, registry, "demo-test", IMAGE.image_id, scale=1, out_dir=out_dir
        )
        payload = validation_payload(store, registry, "demo-test", IMAGE.image_id, scale=1)
        (out_dir / "validation.json").write_bytes(to_json_bytes(payload))
        overlays = render_overlays(
            store, registry, "demo-test", IMAGE.image_id, scale=1, out_root=out_dir
        )
    finally:
        store.close()

    print(f"\naggregate heat map: {files['png']}")
    for entry in payload["per_user"]:
        flag = f" ({entry['degenerate_reason']})" if entry["degenerate"] else ""
        print(f"  {entry['user_id']:>8}: jaccard={entry['jaccard']:.3f}{flag}")
    stats = payload["per_image"]
    print(f"image stats: min={stats['min']:.3f} avg={stats['avg']:.3f} max={stats['max']:.3f}")
    print(f"overlays: {', '.join(str(p) for p in overlays)}")


if __name__ == "__main__":
    main()
