import pytest

from motkit.association import Strategy
from motkit.formats import Detection
from motkit.geometry import (
    Displacement,
    Point2,
    Size2,
    TrackedSizeLTRB,
    box_from_center_size,
)
from motkit.tracker import TrackerConfig, TrackerState, run_sequence, step


def oracle_det(frame, cx, cy, w=10.0, h=14.0, prev=None, conf=1.0, cls=1):
    """Detection with exact channels computed from the true previous center."""
    px, py = prev if prev is not None else (cx, cy)
    prev_box = box_from_center_size(Point2(px, py), Size2(w, h))
    return Detection(
        frame=frame,
        center=Point2(cx, cy),
        size=Size2(w, h),
        confidence=conf,
        class_id=cls,
        disp=Displacement(cx - px, cy - py),
        tracked_size=TrackedSizeLTRB(prev_box.left, prev_box.top, prev_box.right, prev_box.bottom),
        iou_pred=1.0 if (px, py) == (cx, cy) else 0.0,
    )


def static_frames(n, gaps=(), cx=50.0, cy=50.0):
    """A static object present on every frame not listed in gaps."""
    frames = []
    for f in range(1, n + 1):
        dets = [] if f in gaps else [oracle_det(f, cx, cy)]
        frames.append((f, dets))
    return frames


CFG = TrackerConfig(strategy=Strategy.IOU, variant="ltrb")


class TestStep:
    def test_cold_start_assigns_ids_in_detection_order(self):
        dets = [
            oracle_det(1, 20, 20, conf=0.7),
            oracle_det(1, 60, 20, conf=0.95),
            oracle_det(1, 100, 20, conf=0.8),
        ]
        state, records = step(TrackerState(), dets, CFG)
        assert [r.track_id for r in records] == [1, 2, 3]
        assert [t.track_id for t in state.live] == [1, 2, 3]
        assert state.next_id == 4
        # record geometry comes from the detections, in order
        assert records[0].box == dets[0].box()

    def test_matched_tracklet_updates_and_resets_age(self):
        state, _ = step(TrackerState(), [oracle_det(1, 50, 50)], CFG)
        state, _ = step(state, [], CFG)
        assert state.live[0].age == 1
        state, records = step(state, [oracle_det(3, 50, 50)], CFG)
        assert state.live[0].age == 0
        assert records[0].track_id == 1

    def test_unmatched_tracklet_keeps_frozen_box(self):
        state, _ = step(TrackerState(), [oracle_det(1, 50, 50)], CFG)
        frozen = state.live[0].last_box
        for _ in range(5):
            state, records = step(state, [], CFG)
            assert records == []
            assert state.live[0].last_box == frozen
            assert state.live[0].last_center == Point2(50, 50)

    def test_wrong_frame_number_rejected(self):
        state, _ = step(TrackerState(), [oracle_det(1, 50, 50)], CFG)
        with pytest.raises(ValueError, match="frame"):
            step(state, [oracle_det(5, 50, 50)], CFG)

    def test_retirement_at_lifetime(self):
        cfg = TrackerConfig(strategy=Strategy.IOU, variant="ltrb", lifetime=3)
        state, _ = step(TrackerState(), [oracle_det(1, 50, 50)], cfg)
        state, _ = step(state, [], cfg)
        state, _ = step(state, [], cfg)
        assert len(state.live) == 1 and state.live[0].age == 2
        state, _ = step(state, [], cfg)
        assert state.live == ()


class TestRunSequence:
    def test_zero_frames(self):
        assert run_sequence([], CFG) == []

    def test_single_linear_object_keeps_one_id_under_every_strategy(self):
        frames = []
        for f in range(1, 21):
            cx = 20.0 + 2.0 * (f - 1)
            prev = (cx - 2.0, 30.0) if f > 1 else None
            frames.append((f, [oracle_det(f, cx, 30.0, prev=prev)]))
        # moving object: true adjacent overlap is below 1, recompute it
        fixed = []
        for f, dets in frames:
            d = dets[0]
            if f > 1:
                from motkit.geometry import iou as geo_iou

                prev_box = box_from_center_size(Point2(d.center.x - 2, 30.0), d.size)
                d = Detection(
                    frame=d.frame, center=d.center, size=d.size, confidence=1.0,
                    class_id=1, disp=Displacement(2.0, 0.0),
                    tracked_size=TrackedSizeLTRB(prev_box.left, prev_box.top, prev_box.right, prev_box.bottom),
                    iou_pred=geo_iou(prev_box, d.box()),
                )
            fixed.append((f, [d]))
        for strategy in Strategy:
            cfg = TrackerConfig(strategy=strategy, variant="ltrb")
            records = run_sequence(fixed, cfg)
            assert len(records) == 20
            assert {r.track_id for r in records} == {1}, strategy

    def test_gap_shorter_than_lifetime_resumes_id(self):
        frames = static_frames(40, gaps=set(range(2, 7)))  # absent frames 2-6
        records = run_sequence(frames, CFG)
        assert {r.track_id for r in records} == {1}
        assert [r.frame for r in records] == [1] + list(range(7, 41))

    def test_gap_of_lifetime_minus_one_resumes(self):
        # absent frames 2..30 (29 frames), reappears at 31
        frames = static_frames(31, gaps=set(range(2, 31)))
        records = run_sequence(frames, CFG)
        assert {r.track_id for r in records} == {1}

    def test_gap_of_lifetime_spawns_new_id(self):
        # absent frames 2..31 (30 frames), reappears at 32
        frames = static_frames(32, gaps=set(range(2, 32)))
        records = run_sequence(frames, CFG)
        assert [r.track_id for r in records] == [1, 2]

    def test_retired_ids_never_reused(self):
        frames = static_frames(80, gaps=set(range(2, 32)) | set(range(40, 75)))
        records = run_sequence(frames, CFG)
        ids = [r.track_id for r in records]
        assert ids == sorted(ids)
        assert set(ids) == {1, 2, 3}

    def test_non_contiguous_frames_rejected(self):
        frames = [(1, [oracle_det(1, 50, 50)]), (3, [oracle_det(3, 50, 50)])]
        with pytest.raises(ValueError, match="non-contiguous"):
            run_sequence(frames, CFG)

    def test_confidence_threshold_is_strict(self):
        frames = [(1, [oracle_det(1, 50, 50, conf=0.4)])]
        assert run_sequence(frames, CFG) == []
        frames = [(1, [oracle_det(1, 50, 50, conf=0.41)])]
        assert len(run_sequence(frames, CFG)) == 1

    def test_deterministic(self):
        frames = static_frames(25, gaps={5, 6, 12})
        assert run_sequence(frames, CFG) == run_sequence(frames, CFG)

    def test_starts_at_arbitrary_first_frame(self):
        frames = [(7, [oracle_det(7, 50, 50)]), (8, [oracle_det(8, 50, 50)])]
        records = run_sequence(frames, CFG)
        assert [r.frame for r in records] == [7, 8]
        assert {r.track_id for r in records} == {1}


class TestConfigValidation:
    def test_bad_lifetime(self):
        with pytest.raises(ValueError):
            TrackerConfig(lifetime=0)

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            TrackerConfig(out_threshold=1.5)

    def test_bad_variant(self):
        with pytest.raises(ValueError):
            TrackerConfig(variant="xyz")

    def test_bad_filter_form(self):
        with pytest.raises(ValueError):
            TrackerConfig(iou_filter_form="other")
