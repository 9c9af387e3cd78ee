"""Motion-start detection and the snap-timing response.

Snap timing is the number of frames from the moment the motion player
starts moving to the ball snap. The start comes from the ``man_in_motion``
tag when the motion player is the only player charted in motion since the
line set, and otherwise from the first frame where the player's speed
reaches a fixed fraction of their peak speed between line set and snap.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .errors import CalibrationError, DetectionError
from .ingest import PlayRecord, ValidationReport

log = logging.getLogger(__name__)

DEFAULT_RATIO_THRESHOLD = 0.45
EVENT_TAG = "event_tag"
SPEED_THRESHOLD = "speed_threshold"


@dataclass(frozen=True)
class SnapTiming:
    game_id: str
    play_id: str
    t_lineset: int
    t_motion: int
    t_snap: int
    detection_source: str

    def __post_init__(self):
        if not self.t_lineset <= self.t_motion < self.t_snap:
            raise DetectionError(
                f"{self.game_id}/{self.play_id}: need t_lineset <= t_motion < t_snap, "
                f"got {self.t_lineset}, {self.t_motion}, {self.t_snap}"
            )

    @property
    def key(self) -> tuple[str, str]:
        return (self.game_id, self.play_id)

    @property
    def delta(self) -> int:
        return self.t_snap - self.t_motion


@dataclass(frozen=True)
class RatioCalibration:
    ratios: tuple[float, ...]
    threshold: float


def _window(play: PlayRecord) -> tuple[int, int]:
    t_lineset = play.event_frame("line_set")
    t_snap = play.event_frame("ball_snap")
    if t_lineset is None or t_snap is None:
        raise DetectionError(f"{play.game_id}/{play.play_id}: missing line_set or ball_snap")
    if t_lineset >= t_snap:
        raise DetectionError(f"{play.game_id}/{play.play_id}: line_set at or after ball_snap")
    return t_lineset, t_snap


def _motion_speeds(play: PlayRecord, t_lineset: int, t_snap: int) -> tuple[np.ndarray, np.ndarray]:
    track = play.motion_track
    if track is None:
        raise DetectionError(f"{play.game_id}/{play.play_id}: no motion player track")
    frames, speeds = track.window(t_lineset, t_snap)
    if len(frames) == 0:
        raise DetectionError(f"{play.game_id}/{play.play_id}: motion player has no frames between line set and snap")
    return frames, speeds


def motion_start_from_event(play: PlayRecord) -> int | None:
    """Frame of the ``man_in_motion`` tag, or None when the rule does not apply.

    The rule applies only when the motion player is the sole player charted
    in motion since the line set and exactly one tag exists.
    """
    if not play.motion_player_only_mover:
        return None
    frames = play.event_frames("man_in_motion")
    if len(frames) != 1:
        return None
    return frames[0]


def _event_in_window(play: PlayRecord) -> int | None:
    frame = motion_start_from_event(play)
    if frame is None:
        return None
    t_lineset, t_snap = _window(play)
    if not t_lineset <= frame < t_snap:
        log.info("%s/%s: man_in_motion at %d outside [%d, %d)", play.game_id, play.play_id, frame, t_lineset, t_snap)
        return None
    return frame


def speed_ratio(play: PlayRecord) -> float | None:
    """Motion player's speed at the tag divided by their peak window speed."""
    frame = _event_in_window(play)
    if frame is None:
        return None
    t_lineset, t_snap = _window(play)
    _, speeds = _motion_speeds(play, t_lineset, t_snap)
    peak = float(speeds.max())
    if peak <= 0:
        return None
    return float(play.motion_track.at(frame).s) / peak


def calibrate_ratio(plays: Iterable[PlayRecord], report: ValidationReport | None = None) -> RatioCalibration:
    """Average speed ratio over event-tagged plays, rounded to two decimals.

    Plays where the event rule does not apply (or the tag falls outside the
    line-set-to-snap window) are skipped.

    Raises
    ------
    CalibrationError
        No play yields a usable ratio.
    """
    ratios = []
    for play in plays:
        try:
            r = speed_ratio(play)
        except DetectionError as exc:
            if report is not None:
                report.reject(play.key, f"calibration: {exc}")
            continue
        if r is None:
            if report is not None and motion_start_from_event(play) is not None:
                report.reject(play.key, "calibration: man_in_motion outside line_set..ball_snap or zero peak speed")
            continue
        ratios.append(r)
    if not ratios:
        raise CalibrationError("no event-tagged plays with a usable speed ratio")
    threshold = round(float(np.mean(ratios)), 2)
    log.info("calibrated speed-ratio threshold %.2f from %d plays", threshold, len(ratios))
    return RatioCalibration(tuple(ratios), threshold)


def calibrate_or_default(plays: Iterable[PlayRecord], override: float | None = None) -> float:
    """Threshold to use for a corpus: override, else calibrated, else 0.45."""
    if override is not None:
        return float(override)
    try:
        return calibrate_ratio(plays).threshold
    except CalibrationError:
        log.warning("no event-tagged plays; using default threshold %.2f", DEFAULT_RATIO_THRESHOLD)
        return DEFAULT_RATIO_THRESHOLD


def first_crossing(frames: np.ndarray, speeds: np.ndarray, threshold: float) -> int:
    """First frame whose speed reaches ``threshold`` times the window peak."""
    peak = float(speeds.max())
    if not peak > 0:
        raise DetectionError("peak speed in window is zero")
    hits = np.flatnonzero(speeds >= threshold * peak)
    if len(hits) == 0:
        raise DetectionError("no frame reaches the speed threshold")
    return int(frames[hits[0]])


def motion_start_from_threshold(play: PlayRecord, threshold: float) -> int:
    """First frame in ``[t_lineset, t_snap)`` with speed >= threshold x peak."""
    t_lineset, t_snap = _window(play)
    frames, speeds = _motion_speeds(play, t_lineset, t_snap)
    try:
        return first_crossing(frames, speeds, threshold)
    except DetectionError as exc:
        raise DetectionError(f"{play.game_id}/{play.play_id}: {exc}") from None


def compute_snap_timing(play: PlayRecord, threshold: float) -> SnapTiming:
    t_lineset, t_snap = _window(play)
    frame = _event_in_window(play)
    if frame is not None:
        source = EVENT_TAG
    else:
        frame = motion_start_from_threshold(play, threshold)
        source = SPEED_THRESHOLD
    return SnapTiming(play.game_id, play.play_id, t_lineset, frame, t_snap, source)


def detect_all(
    plays: Iterable[PlayRecord], threshold: float, report: ValidationReport | None = None
) -> list[SnapTiming]:
    """Snap timings for every play; failures are logged and skipped."""
    out = []
    for play in plays:
        try:
            out.append(compute_snap_timing(play, threshold))
        except DetectionError as exc:
            if report is not None:
                report.reject(play.key, f"detection: {exc}")
            else:
                log.info("detection failed: %s", exc)
    return out


SNAP_TIMING_COLUMNS = ("game_id", "play_id", "t_lineset", "t_motion", "t_snap", "delta", "detection_source")


def write_snap_timings(timings: Iterable[SnapTiming], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SNAP_TIMING_COLUMNS)
    for t in timings:
        writer.writerow([t.game_id, t.play_id, t.t_lineset, t.t_motion, t.t_snap, t.delta, t.detection_source])


def read_snap_timings(stream: TextIO) -> list[SnapTiming]:
    rows = csv.DictReader(line for line in stream if not line.startswith("#"))
    return [
        SnapTiming(r["game_id"], r["play_id"], int(r["t_lineset"]), int(r["t_motion"]), int(r["t_snap"]), r["detection_source"])
        for r in rows
    ]
