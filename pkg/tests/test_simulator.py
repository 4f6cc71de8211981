import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fixtures import FULL, IMAGE, dweller_script, scanner_script, two_roi_script
from interest_miner.engine import (
    BoundingBox,
    EventKind,
    ImageMeta,
    InterestAccumulator,
    threshold_mask,
)
from interest_miner.simulator import (
    BehaviorScript,
    Phase,
    SuiteParseError,
    generate,
    load_suite,
    recovery_score,
)


def feed(script):
    acc = InterestAccumulator(script.image)
    for e in generate(script):
        acc.add_event(e)
    return acc


class TestGenerate:
    def test_empty_phases_single_session_end(self):
        script = BehaviorScript(0, IMAGE, (), ())
        events = generate(script)
        assert len(events) == 1
        assert events[0].kind is EventKind.SESSION_END and events[0].t == 0

    def test_single_full_image_phase_yields_zero_heatmap(self):
        script = BehaviorScript(0, IMAGE, (), (Phase(FULL, 1000),))
        events = generate(script)
        assert [e.t for e in events] == [0, 1000]
        assert events[1].kind is EventKind.SESSION_END
        assert not feed(script).grid.any()

    def test_dweller_mask_within_roi(self):
        script = dweller_script()
        mask = threshold_mask(feed(script).get_heatmap())
        roi = np.zeros((64, 64), bool)
        roi[16:48, 16:48] = True
        assert not mask.bits[~roi].any()

    def test_same_seed_same_trace(self):
        script = BehaviorScript(
            7, IMAGE, (), (Phase(FULL, 100), Phase(BoundingBox(0, 0, 8, 8), 50)),
            dwell_jitter_ms=30, bbox_jitter_px=5,
        )
        assert generate(script) == generate(script)

    def test_kind_rule_area_change_is_zoom(self):
        script = BehaviorScript(
            0,
            IMAGE,
            (),
            (
                Phase(FULL, 10),                           # same area as implicit full view
                Phase(BoundingBox(0, 0, 16, 16), 10),      # shrink: zoom
                Phase(BoundingBox(32, 32, 48, 48), 10),    # same area: pan
                Phase(BoundingBox(0, 0, 32, 32), 10),      # grow: zoom
            ),
        )
        kinds = [e.kind for e in generate(script)[:-1]]
        assert kinds == [EventKind.PAN, EventKind.ZOOM, EventKind.PAN, EventKind.ZOOM]

    def test_jittered_boxes_stay_in_image(self):
        script = BehaviorScript(
            11,
            IMAGE,
            (),
            tuple(Phase(BoundingBox(0, 0, 8, 8), 100) for _ in range(20)),
            bbox_jitter_px=100,
        )
        for e in generate(script)[:-1]:
            assert 0 <= e.bbox.x0 < e.bbox.x1 <= 64
            assert 0 <= e.bbox.y0 < e.bbox.y1 <= 64

    def test_timestamps_monotone_under_jitter(self):
        script = BehaviorScript(
            5,
            IMAGE,
            (),
            tuple(Phase(BoundingBox(0, 0, 8, 8), 5) for _ in range(30)),
            dwell_jitter_ms=50,
        )
        ts = [e.t for e in generate(script)]
        assert ts == sorted(ts)


class TestRecoveryScore:
    def test_dweller_tiling_recovers_roi_exactly(self):
        report = recovery_score(dweller_script())
        assert report.jaccard == 1.0
        assert report.mask_pixels == report.roi_pixels == 1024
        assert not report.degenerate

    def test_uniform_scanner_degenerate_zero(self):
        report = recovery_score(scanner_script())
        assert report.jaccard == 0.0
        assert report.degenerate and report.degenerate_reason == "empty_mask"

    def test_two_roi_split_mask_covers_both(self):
        script = two_roi_script()
        mask = threshold_mask(feed(script).get_heatmap())
        for roi in script.planted_rois:
            assert mask.bits[roi.y0 : roi.y1, roi.x0 : roi.x1].all()
        report = recovery_score(script)
        assert report.jaccard == 1.0  # mask == A | B exactly (oracle-verified)

    def test_no_planted_rois_rejected(self):
        with pytest.raises(ValueError):
            recovery_score(BehaviorScript(0, IMAGE, (), ()))

    def test_same_seed_same_score(self):
        script = dweller_script()
        assert recovery_score(script) == recovery_score(script)


@given(st.integers(0, 3), st.integers(1, 2000))
def test_dwell_dominance(phase_idx, extra):
    base_phases = (
        Phase(BoundingBox(0, 0, 16, 16), 100),
        Phase(BoundingBox(16, 16, 32, 32), 200),
        Phase(BoundingBox(32, 0, 48, 16), 300),
        Phase(BoundingBox(0, 32, 16, 48), 400),
    )
    script = BehaviorScript(0, IMAGE, (), base_phases)
    bumped_phases = tuple(
        Phase(p.bbox, p.dwell_ms + (extra if i == phase_idx else 0))
        for i, p in enumerate(base_phases)
    )
    bumped = BehaviorScript(0, IMAGE, (), bumped_phases)
    before, after = feed(script).grid, feed(bumped).grid
    box = base_phases[phase_idx].bbox
    inside = np.zeros((64, 64), bool)
    inside[box.y0 : box.y1, box.x0 : box.x1] = True
    assert (after[inside] >= before[inside]).all()
    assert np.array_equal(after[~inside], before[~inside])


class TestSuiteFiles:
    def write(self, tmp_path, payload):
        path = tmp_path / "suite.json"
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
        return path

    def suite_dict(self):
        return {
            "test_id": "sim",
            "users": [
                {
                    "user_id": "u1",
                    "seed": 4,
                    "image": {"image_id": "demo", "width": 64, "height": 64},
                    "planted_rois": [[16, 16, 48, 48]],
                    "phases": [
                        {"bbox": [0, 0, 64, 64], "dwell_ms": 100},
                        {"bbox": [16, 16, 48, 48], "dwell_ms": 900},
                    ],
                }
            ],
        }

    def test_round_trip(self, tmp_path):
        suite = load_suite(self.write(tmp_path, self.suite_dict()))
        assert suite.test_id == "sim"
        script = suite.entries[0].script
        assert script.image == ImageMeta("demo", 64, 64)
        assert script.phases[1].dwell_ms == 900
        assert recovery_score(script).jaccard > 0

    def test_json_error_carries_line_number(self, tmp_path):
        path = self.write(tmp_path, '{\n "test_id": "x",\n "users": [}\n}')
        with pytest.raises(SuiteParseError, match=r":3:"):
            load_suite(path)

    def test_missing_user_id(self, tmp_path):
        payload = self.suite_dict()
        del payload["users"][0]["user_id"]
        with pytest.raises(SuiteParseError, match="users\\[0\\]"):
            load_suite(self.write(tmp_path, payload))

    def test_bad_rectangle_reported(self, tmp_path):
        payload = self.suite_dict()
        payload["users"][0]["phases"][0]["bbox"] = [0, 0, 64]
        with pytest.raises(SuiteParseError, match="phase 0 bbox"):
            load_suite(self.write(tmp_path, payload))

    def test_out_of_bounds_phase_rejected(self, tmp_path):
        payload = self.suite_dict()
        payload["users"][0]["phases"][0]["bbox"] = [0, 0, 65, 64]
        with pytest.raises(SuiteParseError):
            load_suite(self.write(tmp_path, payload))
