import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_play
from snaptiming.detection import (
    DEFAULT_RATIO_THRESHOLD,
    EVENT_TAG,
    SPEED_THRESHOLD,
    SnapTiming,
    calibrate_or_default,
    calibrate_ratio,
    compute_snap_timing,
    detect_all,
    first_crossing,
    motion_start_from_event,
    motion_start_from_threshold,
    read_snap_timings,
    write_snap_timings,
)
from snaptiming.errors import CalibrationError, DetectionError
from snaptiming.ingest import ValidationReport


class TestEventRule:
    def test_fixture_tag(self, fixture_play):
        assert motion_start_from_event(fixture_play) == 81

    def test_without_tag_not_applicable(self):
        play = make_play(np.linspace(0, 5, 60), 10, 50)
        assert motion_start_from_event(play) is None

    def test_planted_tag(self):
        play = make_play(np.linspace(0, 5, 60), 10, 50, tag=40)
        timing = compute_snap_timing(play, 0.45)
        assert (timing.t_motion, timing.detection_source) == (40, EVENT_TAG)

    def test_tag_ignored_when_another_player_moved(self):
        speeds = np.r_[np.zeros(30), np.full(30, 4.0)]
        play = make_play(speeds, 10, 50, tag=40, only_mover=False)
        assert motion_start_from_event(play) is None
        timing = compute_snap_timing(play, 0.45)
        assert (timing.t_motion, timing.detection_source) == (31, SPEED_THRESHOLD)

    def test_tag_outside_window_falls_back(self):
        speeds = np.r_[np.zeros(30), np.full(30, 4.0)]
        play = make_play(speeds, 10, 50, tag=5)
        timing = compute_snap_timing(play, 0.45)
        assert timing.detection_source == SPEED_THRESHOLD and timing.t_motion == 31


class TestFirstCrossing:
    def test_short_trace(self):
        frames = np.arange(10, 15)
        speeds = np.array([0.1, 0.2, 1.0, 2.0, 2.0])
        # the cut is 0.45 * 2.0 = 0.9 and the first speed at or above it sits on frame 12
        assert first_crossing(frames, speeds, 0.45) == 12

    def test_constant_trace_returns_first_frame(self):
        assert first_crossing(np.arange(5, 15), np.full(10, 3.0), 0.45) == 5

    def test_zero_speed_raises(self):
        with pytest.raises(DetectionError):
            first_crossing(np.arange(5), np.zeros(5), 0.45)

    def test_sigmoid_ramp(self):
        k = 0.6
        # place the 0.45 level of the logistic halfway between frames 61 and 62
        center = 61.5 - np.log(0.45 / 0.55) / k
        frames = np.arange(1, 121)
        speeds = 6.0 / (1.0 + np.exp(-k * (frames - center)))
        play = make_play(speeds, 40, 110)
        frame = motion_start_from_threshold(play, 0.45 * 6.0 / speeds[frames < 110].max())
        assert frame == 62

    @given(
        st.lists(st.floats(0.0, 10.0), min_size=2, max_size=40).filter(lambda v: max(v) > 0),
        st.floats(0.01, 1.0), st.floats(0.01, 1.0),
    )
    @settings(max_examples=150)
    def test_threshold_monotone(self, speeds, a, b):
        lo, hi = sorted((a, b))
        frames = np.arange(len(speeds))
        s = np.asarray(speeds)
        assert first_crossing(frames, s, lo) <= first_crossing(frames, s, hi)


class TestSnapTiming:
    def test_fixture(self, fixture_play):
        t = compute_snap_timing(fixture_play, 0.45)
        assert (t.t_motion, t.t_snap, t.delta) == (81, 117, 36)

    def test_minimum_delta(self):
        speeds = np.r_[np.zeros(48), np.full(12, 3.0)]
        play = make_play(speeds, 10, 50)
        t = compute_snap_timing(play, 0.45)
        assert t.t_motion == 49 and t.delta == 1

    def test_ordering_enforced(self):
        with pytest.raises(DetectionError):
            SnapTiming("g", "1", 10, 50, 50, EVENT_TAG)

    def test_missing_lineset(self):
        play = make_play(np.ones(60), 10, 50)
        tracks = tuple(t.__class__(**{**t.__dict__, "event": tuple(None if e == "line_set" else e for e in t.event)})
                       for t in play.tracks)
        bad = play.__class__(**{**play.__dict__, "tracks": tracks})
        with pytest.raises(DetectionError):
            compute_snap_timing(bad, 0.45)
        report = ValidationReport()
        assert detect_all([bad], 0.45, report) == []
        assert len(report) == 1

    def test_deterministic(self, small_plays):
        a = detect_all(small_plays, 0.45)
        b = detect_all(small_plays, 0.45)
        assert a == b

    def test_emitted_invariants(self, small_plays):
        for t in detect_all(small_plays, 0.45):
            assert t.delta >= 1 and t.t_motion >= t.t_lineset

    def test_generator_recovery(self, small_corpus, small_plays):
        truth = small_corpus.truth_by_key()
        timings = detect_all(small_plays, calibrate_or_default(small_plays))
        err = np.array([abs(t.t_motion - truth[t.key].t_motion) for t in timings])
        assert len(timings) == len(small_plays)
        assert np.mean(err <= 2) >= 0.95

    def test_csv_round_trip(self, small_plays):
        timings = detect_all(small_plays, 0.45)
        buf = io.StringIO()
        write_snap_timings(timings, buf)
        buf.seek(0)
        assert read_snap_timings(buf) == timings


class TestCalibration:
    def _ratio_play(self, ratio, play_id):
        speeds = np.r_[np.zeros(20), np.full(10, ratio * 4.0), np.full(30, 4.0)]
        return make_play(speeds, 10, 55, tag=25, play_id=play_id)

    def test_two_play_mean(self):
        cal = calibrate_ratio([self._ratio_play(0.3, "1"), self._ratio_play(0.5, "2")])
        assert cal.threshold == pytest.approx(0.40)
        np.testing.assert_allclose(cal.ratios, [0.3, 0.5])

    def test_event_at_peak(self):
        assert calibrate_ratio([self._ratio_play(1.0, "1")]).threshold == 1.0

    def test_no_tags(self):
        play = make_play(np.ones(60), 10, 50)
        with pytest.raises(CalibrationError):
            calibrate_ratio([play])
        assert calibrate_or_default([play]) == DEFAULT_RATIO_THRESHOLD

    def test_override_wins(self):
        assert calibrate_or_default([self._ratio_play(0.3, "1")], override=0.6) == 0.6

    def test_rounded_to_two_decimals(self):
        plays = [self._ratio_play(r, str(i)) for i, r in enumerate([0.301, 0.412, 0.503])]
        assert calibrate_ratio(plays).threshold == 0.41

    def test_generator_corpus_near_tag_ratio(self, small_plays):
        assert calibrate_ratio(small_plays).threshold == pytest.approx(0.45, abs=0.03)
