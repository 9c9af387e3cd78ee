"""Tracking and charting ingestion.

Tracking CSVs follow the Big Data Bowl 2025 layout: one row per
(game, play, player, frame) with ``gameId, playId, nflId, frameId,
playDirection, x, y, s, a, dis, o, dir, event``. Extra columns are ignored;
rows without an ``nflId`` (the football) are skipped.

The charting CSV has one row per (game, play, player). Player-level
indicators live on each row; play-level context (down, timeouts, teams,
dropback flag, play clock) is repeated on every row of the play and must
agree across them.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, TextIO

import numpy as np

from .errors import IntegrityError, ParseError, SchemaError

log = logging.getLogger(__name__)

FIELD_LENGTH = 120.0
FIELD_WIDTH = 53.3
FRAME_RATE_HZ = 10

TRACKING_COLUMNS = (
    "gameId", "playId", "nflId", "frameId", "playDirection",
    "x", "y", "s", "a", "dis", "o", "dir", "event",
)
CHARTING_COLUMNS = (
    "gameId", "playId", "nflId", "position", "teamAbbr",
    "inMotionAtBallSnap", "motionSinceLineset", "wasRunningRoute",
    "isDropback", "down", "timeoutsRemaining", "possessionTeam", "defensiveTeam",
)
OPTIONAL_PLAY_COLUMNS = ("playClockAtMotion", "playClockAtSnap")

HAVOC_FLAGS = ("pass_breakup", "forced_fumble", "tackle_for_loss", "interception", "sack", "pressure")
# charting column(s) that set each havoc flag when any defender row is truthy
HAVOC_COLUMNS = {
    "pass_breakup": ("passDefensed",),
    "forced_fumble": ("forcedFumbleAsDefense",),
    "tackle_for_loss": ("tackleForALoss",),
    "interception": ("hadInterception",),
    "sack": ("sackAsDefense", "sackYardsAsDefense", "halfSackYardsAsDefense"),
    "pressure": ("causedPressure",),
}

ROLES = ("quarterback", "center", "motion_player", "other_offense", "defense")
MOTION_POSITIONS = ("RB", "TE", "WR")
_NA = {"", "NA", "na", "NaN", "nan", "None", "null"}
_TRUE = {"true", "t", "1", "yes", "y", "1.0"}
_FALSE = {"false", "f", "0", "no", "n", "0.0"}
_FLOAT_FIELDS = ("x", "y", "s", "a", "dis", "o", "dir")


class FrameSample(NamedTuple):
    frame_id: int
    x: float
    y: float
    s: float
    a: float
    dis: float
    o: float
    dir: float
    event: str | None


@dataclass(frozen=True, eq=False)
class PlayerTrack:
    """One player's frames within a play, stored column-wise."""

    player_id: str
    role: str
    frame_id: np.ndarray
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    a: np.ndarray
    dis: np.ndarray
    o: np.ndarray
    dir: np.ndarray
    event: tuple

    def __len__(self) -> int:
        return len(self.frame_id)

    def __iter__(self) -> Iterator[FrameSample]:
        for i in range(len(self)):
            yield self.sample(i)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PlayerTrack):
            return NotImplemented
        if (self.player_id, self.role, self.event) != (other.player_id, other.role, other.event):
            return False
        return np.array_equal(self.frame_id, other.frame_id) and all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in _FLOAT_FIELDS
        )

    def sample(self, i: int) -> FrameSample:
        return FrameSample(
            int(self.frame_id[i]), float(self.x[i]), float(self.y[i]), float(self.s[i]),
            float(self.a[i]), float(self.dis[i]), float(self.o[i]), float(self.dir[i]), self.event[i],
        )

    def index_of(self, frame: int) -> int | None:
        """Position of ``frame`` in the track, or None if absent."""
        if len(self) == 0:
            return None
        i = int(frame - self.frame_id[0])
        if 0 <= i < len(self) and self.frame_id[i] == frame:
            return i
        return None

    def at(self, frame: int) -> FrameSample:
        i = self.index_of(frame)
        if i is None:
            raise KeyError(f"frame {frame} not in track of player {self.player_id}")
        return self.sample(i)

    def window(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        """Frame ids and speeds for frames in ``[start, stop)``."""
        mask = (self.frame_id >= start) & (self.frame_id < stop)
        return self.frame_id[mask], self.s[mask]

    def mirrored(self) -> "PlayerTrack":
        return replace(
            self,
            x=FIELD_LENGTH - self.x,
            y=FIELD_WIDTH - self.y,
            o=(self.o + 180.0) % 360.0,
            dir=(self.dir + 180.0) % 360.0,
        )

    def with_role(self, role: str) -> "PlayerTrack":
        return replace(self, role=role)


@dataclass(frozen=True)
class PlayerCharting:
    """Player-play indicators used for role and motion resolution."""

    position: str = ""
    team: str = ""
    in_motion_at_snap: bool = False
    motion_since_lineset: bool = False
    running_route: bool = False


def _default_havoc() -> tuple[bool, ...]:
    return (False,) * len(HAVOC_FLAGS)


@dataclass(frozen=True)
class PlayRecord:
    game_id: str
    play_id: str
    tracks: tuple[PlayerTrack, ...]
    play_direction: str = "right"
    normalized: bool = False
    qb_id: str | None = None
    motion_player_id: str | None = None
    center_id: str | None = None
    offense_team: str | None = None
    defense_team: str | None = None
    down: int | None = None
    play_clock_at_motion: float | None = None
    play_clock_at_snap: float | None = None
    timeouts_remaining: int | None = None
    motion_position: str | None = None
    n_motion_since_lineset: int = 0
    motion_player_only_mover: bool = False
    havoc_flags: tuple[bool, ...] = field(default_factory=_default_havoc)
    is_pass_play: bool = False
    motion_at_snap: bool = False
    route_run: bool = False
    charting: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def key(self) -> tuple[str, str]:
        return (self.game_id, self.play_id)

    def track(self, player_id: str | None) -> PlayerTrack | None:
        for t in self.tracks:
            if t.player_id == player_id:
                return t
        return None

    @property
    def qb_track(self) -> PlayerTrack | None:
        return self.track(self.qb_id)

    @property
    def center_track(self) -> PlayerTrack | None:
        return self.track(self.center_id)

    @property
    def motion_track(self) -> PlayerTrack | None:
        return self.track(self.motion_player_id)

    def event_frames(self, name: str) -> list[int]:
        """Sorted distinct frames tagged with ``name`` on any track."""
        frames = set()
        for t in self.tracks:
            for f, e in zip(t.frame_id, t.event):
                if e == name:
                    frames.add(int(f))
        return sorted(frames)

    def event_frame(self, name: str) -> int | None:
        frames = self.event_frames(name)
        return frames[0] if frames else None

    @property
    def any_havoc(self) -> bool:
        return any(self.havoc_flags)

    @property
    def havoc(self) -> dict[str, bool]:
        return dict(zip(HAVOC_FLAGS, self.havoc_flags))


@dataclass
class ValidationReport:
    """Accumulates per-play rejections and stage counts."""

    entries: list[tuple[str, str, str]] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)

    def reject(self, key: tuple[str, str], reason: str) -> None:
        log.info("rejected play %s/%s: %s", key[0], key[1], reason)
        self.entries.append((key[0], key[1], reason))

    def count(self, name: str, value: int) -> None:
        self.counts[name] = value

    def extend(self, other: "ValidationReport") -> None:
        self.entries.extend(other.entries)
        self.counts.update(other.counts)

    def __len__(self) -> int:
        return len(self.entries)

    def to_text(self) -> str:
        lines = ["validation report", "================="]
        for name, value in self.counts.items():
            lines.append(f"{name}: {value}")
        lines.append(f"rejections: {len(self.entries)}")
        for game, play, reason in self.entries:
            lines.append(f"  {game}/{play}: {reason}")
        return "\n".join(lines) + "\n"


@dataclass
class IngestResult:
    plays: list[PlayRecord]
    report: ValidationReport

    def __iter__(self):
        return iter(self.plays)

    def __len__(self) -> int:
        return len(self.plays)


# ---------------------------------------------------------------- parsing


@contextmanager
def _text_stream(src) -> Iterator[TextIO]:
    if isinstance(src, (str, Path)):
        with open(src, newline="", encoding="utf-8") as fh:
            yield fh
    else:
        yield src


def _is_na(value: str | None) -> bool:
    return value is None or value.strip() in _NA


def parse_bool(value: str | None, line: int | None = None) -> bool:
    if _is_na(value):
        return False
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    try:
        return float(v) != 0.0
    except ValueError:
        raise ParseError(f"cannot read boolean from {value!r}", line) from None


def _parse_float(value: str, name: str, line: int) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ParseError(f"column {name}: cannot read number from {value!r}", line) from None
    if not math.isfinite(out):
        raise ParseError(f"column {name}: non-finite value {value!r}", line)
    return out


def _parse_int(value: str, name: str, line: int) -> int:
    f = _parse_float(value, name, line)
    if f != int(f):
        raise ParseError(f"column {name}: expected integer, got {value!r}", line)
    return int(f)


def _id(value: str) -> str:
    v = value.strip()
    # ids written by spreadsheets sometimes carry a trailing .0
    if v.endswith(".0") and v[:-2].isdigit():
        v = v[:-2]
    return v


def _check_header(header: list[str] | None, required: Iterable[str], what: str) -> None:
    if header is None:
        raise SchemaError(f"{what}: empty file (no header row)")
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{what}: missing required column(s) {', '.join(missing)}")


def _read_tracking_rows(stream: TextIO):
    """Group raw tracking rows into ``{(game, play): {player: [(frame, values)]}}``."""
    reader = csv.DictReader(stream)
    _check_header(reader.fieldnames, TRACKING_COLUMNS, "tracking")
    plays: dict[tuple[str, str], dict] = {}
    directions: dict[tuple[str, str], set] = {}
    seen: set = set()
    for row in reader:
        line = reader.line_num
        if None in row:
            raise ParseError("row has more fields than the header", line)
        if any(row.get(c) is None for c in TRACKING_COLUMNS):
            raise ParseError("row has fewer fields than the header", line)
        if _is_na(row["nflId"]):
            continue
        key = (_id(row["gameId"]), _id(row["playId"]))
        player = _id(row["nflId"])
        frame = _parse_int(row["frameId"], "frameId", line)
        if frame < 1:
            raise ParseError(f"frameId must be positive, got {frame}", line)
        values = tuple(_parse_float(row[c], c, line) for c in _FLOAT_FIELDS)
        event = None if _is_na(row["event"]) else row["event"].strip()
        direction = row["playDirection"].strip().lower()
        if direction not in ("left", "right"):
            raise ParseError(f"playDirection must be left or right, got {row['playDirection']!r}", line)
        ident = (key, player, frame)
        if ident in seen:
            raise IntegrityError(f"line {line}: duplicate (play, player, frame) key {key[0]}/{key[1]}/{player}/{frame}")
        seen.add(ident)
        plays.setdefault(key, {}).setdefault(player, []).append((frame, values, event))
        directions.setdefault(key, set()).add(direction)
    return plays, directions


def _build_track(player: str, rows: list) -> tuple[PlayerTrack | None, str | None]:
    rows = sorted(rows, key=lambda r: r[0])
    frames = np.array([r[0] for r in rows], dtype=np.int64)
    if len(frames) > 1 and np.any(np.diff(frames) != 1):
        gap = int(frames[np.argmax(np.diff(frames) != 1)])
        return None, f"player {player}: frame gap after frame {gap} (10 Hz sampling requires contiguous frames)"
    vals = np.array([r[1] for r in rows], dtype=np.float64).reshape(len(rows), len(_FLOAT_FIELDS))
    x, y, s, a, dis, o, d = (vals[:, i] for i in range(len(_FLOAT_FIELDS)))
    if np.any((x < 0) | (x > FIELD_LENGTH)) or np.any((y < 0) | (y > FIELD_WIDTH)):
        return None, f"player {player}: position outside the field"
    if np.any(s < 0) or np.any(a < 0) or np.any(dis < 0):
        return None, f"player {player}: negative s, a or dis"
    if np.any((o < 0) | (o >= 360)) or np.any((d < 0) | (d >= 360)):
        return None, f"player {player}: angle outside [0, 360)"
    track = PlayerTrack(
        player_id=player, role="other_offense", frame_id=frames,
        x=x, y=y, s=s, a=a, dis=dis, o=o, dir=d,
        event=tuple(r[2] for r in rows),
    )
    return track, None


def _read_charting(stream: TextIO) -> dict[tuple[str, str], dict]:
    reader = csv.DictReader(stream)
    _check_header(reader.fieldnames, CHARTING_COLUMNS, "charting")
    fields = set(reader.fieldnames)
    out: dict[tuple[str, str], dict] = {}
    for row in reader:
        line = reader.line_num
        if None in row:
            raise ParseError("row has more fields than the header", line)
        key = (_id(row["gameId"]), _id(row["playId"]))
        player = _id(row["nflId"])
        entry = out.setdefault(key, {"players": {}, "play": None, "havoc": [False] * len(HAVOC_FLAGS), "conflict": None})
        if player in entry["players"]:
            raise IntegrityError(f"line {line}: duplicate charting row for {key[0]}/{key[1]}/{player}")
        entry["players"][player] = PlayerCharting(
            position=row["position"].strip().upper(),
            team=row["teamAbbr"].strip(),
            in_motion_at_snap=parse_bool(row["inMotionAtBallSnap"], line),
            motion_since_lineset=parse_bool(row["motionSinceLineset"], line),
            running_route=parse_bool(row["wasRunningRoute"], line),
        )
        for i, flag in enumerate(HAVOC_FLAGS):
            for col in HAVOC_COLUMNS[flag]:
                if col in fields and parse_bool(row[col], line):
                    entry["havoc"][i] = True
        play_ctx = _play_context(row, fields, line)
        if entry["play"] is None:
            entry["play"] = play_ctx
        elif entry["play"] != play_ctx and entry["conflict"] is None:
            entry["conflict"] = f"play-level charting columns disagree across rows (line {line})"
    return out


def _optional_float(row, name, fields, line):
    if name not in fields or _is_na(row[name]):
        return None
    return _parse_float(row[name], name, line)


def _optional_int(row, name, line):
    return None if _is_na(row[name]) else _parse_int(row[name], name, line)


def _play_context(row, fields, line) -> tuple:
    return (
        parse_bool(row["isDropback"], line),
        _optional_int(row, "down", line),
        _optional_int(row, "timeoutsRemaining", line),
        row["possessionTeam"].strip(),
        row["defensiveTeam"].strip(),
        _optional_float(row, "playClockAtMotion", fields, line),
        _optional_float(row, "playClockAtSnap", fields, line),
    )


def _unique_player(charting: dict, predicate) -> tuple[str | None, int]:
    hits = [pid for pid, c in charting.items() if predicate(c)]
    return (hits[0] if len(hits) == 1 else None), len(hits)


def _assemble(key, tracks: dict[str, PlayerTrack], direction: str, chart: dict | None, report) -> PlayRecord | None:
    if chart is None:
        return PlayRecord(game_id=key[0], play_id=key[1], tracks=tuple(tracks[p] for p in sorted(tracks)), play_direction=direction)
    if chart["conflict"]:
        report.reject(key, chart["conflict"])
        return None
    players: dict[str, PlayerCharting] = chart["players"]
    is_dropback, down, timeouts, offense, defense, clock_motion, clock_snap = chart["play"]
    if down is not None and down not in (1, 2, 3, 4):
        report.reject(key, f"down {down} not in 1..4")
        return None
    if timeouts is not None and timeouts not in (0, 1, 2, 3):
        report.reject(key, f"timeoutsRemaining {timeouts} not in 0..3")
        return None

    on_offense = {p: c for p, c in players.items() if c.team == offense}
    qb_id, _ = _unique_player(on_offense, lambda c: c.position == "QB")
    center_id, _ = _unique_player(on_offense, lambda c: c.position == "C")
    motion_id, n_motion_at_snap = _unique_player(on_offense, lambda c: c.in_motion_at_snap)
    movers = [p for p, c in on_offense.items() if c.motion_since_lineset]
    only_mover = motion_id is not None and movers == [motion_id]
    motion_pos = players[motion_id].position if motion_id else None
    if motion_pos is not None and motion_pos not in MOTION_POSITIONS:
        motion_pos = None

    roles = {}
    for pid in tracks:
        c = players.get(pid)
        if pid == qb_id:
            roles[pid] = "quarterback"
        elif pid == center_id:
            roles[pid] = "center"
        elif pid == motion_id:
            roles[pid] = "motion_player"
        elif c is not None and c.team == defense:
            roles[pid] = "defense"
        else:
            roles[pid] = "other_offense"

    return PlayRecord(
        game_id=key[0],
        play_id=key[1],
        tracks=tuple(tracks[p].with_role(roles[p]) for p in sorted(tracks)),
        play_direction=direction,
        qb_id=qb_id,
        motion_player_id=motion_id,
        center_id=center_id,
        offense_team=offense or None,
        defense_team=defense or None,
        down=down,
        play_clock_at_motion=clock_motion,
        play_clock_at_snap=clock_snap,
        timeouts_remaining=timeouts,
        motion_position=motion_pos,
        n_motion_since_lineset=len(movers),
        motion_player_only_mover=only_mover,
        havoc_flags=tuple(chart["havoc"]),
        is_pass_play=is_dropback,
        motion_at_snap=n_motion_at_snap >= 1,
        route_run=any(c.in_motion_at_snap and c.running_route for c in on_offense.values()),
        charting={p: c for p, c in players.items()},
    )


def normalize_direction(play: PlayRecord) -> PlayRecord:
    """Mirror a left-moving play so the offense advances toward +x.

    Already-normalized or right-moving plays are returned unchanged.
    """
    if play.normalized or play.play_direction == "right":
        return play
    return replace(play, tracks=tuple(t.mirrored() for t in play.tracks), normalized=True)


def denormalize_direction(play: PlayRecord) -> PlayRecord:
    """Undo :func:`normalize_direction`, restoring raw field coordinates."""
    if not play.normalized:
        return play
    return replace(play, tracks=tuple(t.mirrored() for t in play.tracks), normalized=False)


def parse_tracking(tracking, charting=None) -> IngestResult:
    """Parse a tracking CSV (and optional charting CSV) into validated plays.

    Parameters
    ----------
    tracking
        Path or text stream of frame-level tracking rows.
    charting
        Path or text stream of player-play charting rows. Without it, plays
        carry tracks only and every charting-derived field is left unset.

    Returns
    -------
    IngestResult
        Plays sorted by (game_id, play_id), direction-normalized, plus the
        validation report listing rejected plays.

    Raises
    ------
    SchemaError
        A required column is missing.
    ParseError
        A row is malformed; the message carries its line number.
    IntegrityError
        A (play, player, frame) key repeats.
    """
    with _text_stream(tracking) as fh:
        raw, directions = _read_tracking_rows(fh)
    chart_data = None
    if charting is not None:
        with _text_stream(charting) as fh:
            chart_data = _read_charting(fh)

    report = ValidationReport()
    plays: list[PlayRecord] = []
    for key in sorted(raw):
        if len(directions[key]) != 1:
            report.reject(key, "inconsistent playDirection across rows")
            continue
        tracks = {}
        problem = None
        for player, rows in raw[key].items():
            track, problem = _build_track(player, rows)
            if problem:
                break
            tracks[player] = track
        if problem:
            report.reject(key, problem)
            continue
        if chart_data is not None and key not in chart_data:
            report.reject(key, "no charting rows for play")
            continue
        record = _assemble(key, tracks, next(iter(directions[key])), None if chart_data is None else chart_data[key], report)
        if record is None:
            continue
        for tag in ("ball_snap", "line_set"):
            if len(record.event_frames(tag)) > 1:
                report.reject(key, f"multiple {tag} events")
                record = None
                break
        if record is None:
            continue
        plays.append(normalize_direction(record))
    report.count("plays_parsed", len(plays))
    log.info("parsed %d plays (%d rejected)", len(plays), len(report))
    return IngestResult(plays, report)


def filter_analysis_plays(plays: Iterable[PlayRecord], report: ValidationReport | None = None) -> list[PlayRecord]:
    """Keep passing plays with a route-running receiver in motion at the snap.

    Qualifying plays missing a line_set or ball_snap event, or without a
    resolvable quarterback, center, or motion player, are dropped and
    logged to ``report``.
    """
    report = report if report is not None else ValidationReport()
    kept = []
    n_flagged = 0
    for play in plays:
        if not (play.is_pass_play and play.motion_at_snap and play.route_run):
            continue
        n_flagged += 1
        missing = [n for n, v in (("qb_id", play.qb_id), ("motion_player_id", play.motion_player_id), ("center_id", play.center_id)) if v is None]
        if missing:
            report.reject(play.key, f"unresolved {', '.join(missing)}")
            continue
        absent = [n for n in ("qb_id", "motion_player_id", "center_id") if play.track(getattr(play, n)) is None]
        if absent:
            report.reject(play.key, f"no tracking for {', '.join(absent)}")
            continue
        if play.event_frame("line_set") is None or play.event_frame("ball_snap") is None:
            report.reject(play.key, "missing line_set or ball_snap event")
            continue
        kept.append(play)
    report.count("plays_flagged_for_analysis", n_flagged)
    report.count("plays_retained", len(kept))
    log.info("analysis filter kept %d plays", len(kept))
    return kept


# ------------------------------------------------------------ serialization


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def write_tracking_csv(plays: Iterable[PlayRecord], stream: TextIO) -> None:
    """Write plays back out in the raw tracking CSV layout."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRACKING_COLUMNS)
    for play in plays:
        raw = denormalize_direction(play)
        for track in raw.tracks:
            for fs in track:
                writer.writerow([
                    play.game_id, play.play_id, track.player_id, fs.frame_id, play.play_direction,
                    _fmt(fs.x), _fmt(fs.y), _fmt(fs.s), _fmt(fs.a), _fmt(fs.dis), _fmt(fs.o), _fmt(fs.dir),
                    fs.event if fs.event is not None else "NA",
                ])


def _fmt_opt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    return str(v)


CHARTING_WRITE_COLUMNS = CHARTING_COLUMNS + OPTIONAL_PLAY_COLUMNS + tuple(c[0] for c in HAVOC_COLUMNS.values())


def write_charting_csv(plays: Iterable[PlayRecord], stream: TextIO) -> None:
    """Write the charting rows of plays that carry charting data.

    Play-level havoc flags are written on the first defender row.
    """
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CHARTING_WRITE_COLUMNS)
    for play in plays:
        first_defender = True
        for pid in sorted(play.charting):
            c: PlayerCharting = play.charting[pid]
            is_def = c.team == play.defense_team
            havoc = play.havoc_flags if (is_def and first_defender) else _default_havoc()
            if is_def:
                first_defender = False
            writer.writerow([
                play.game_id, play.play_id, pid, c.position, c.team,
                _fmt_opt(c.in_motion_at_snap), _fmt_opt(c.motion_since_lineset), _fmt_opt(c.running_route),
                _fmt_opt(play.is_pass_play), _fmt_opt(play.down), _fmt_opt(play.timeouts_remaining),
                play.offense_team or "", play.defense_team or "",
                _fmt_opt(play.play_clock_at_motion), _fmt_opt(play.play_clock_at_snap),
                *[_fmt_opt(h) for h in havoc],
            ])


def play_to_dict(play: PlayRecord) -> dict:
    out = {
        k: getattr(play, k)
        for k in (
            "game_id", "play_id", "play_direction", "normalized", "qb_id", "motion_player_id", "center_id",
            "offense_team", "defense_team", "down", "play_clock_at_motion", "play_clock_at_snap",
            "timeouts_remaining", "motion_position", "n_motion_since_lineset", "motion_player_only_mover",
            "is_pass_play", "motion_at_snap", "route_run",
        )
    }
    out["havoc_flags"] = dict(zip(HAVOC_FLAGS, play.havoc_flags))
    out["tracks"] = [
        {
            "player_id": t.player_id,
            "role": t.role,
            "frame_id": t.frame_id.tolist(),
            **{f: getattr(t, f).tolist() for f in _FLOAT_FIELDS},
            "event": list(t.event),
        }
        for t in play.tracks
    ]
    out["charting"] = {pid: c.__dict__ for pid, c in play.charting.items()}
    return out


def play_from_dict(d: dict) -> PlayRecord:
    tracks = tuple(
        PlayerTrack(
            player_id=t["player_id"],
            role=t["role"],
            frame_id=np.asarray(t["frame_id"], dtype=np.int64),
            **{f: np.asarray(t[f], dtype=np.float64) for f in _FLOAT_FIELDS},
            event=tuple(t["event"]),
        )
        for t in d["tracks"]
    )
    fields_ = {k: v for k, v in d.items() if k not in ("tracks", "havoc_flags", "charting")}
    return PlayRecord(
        tracks=tracks,
        havoc_flags=tuple(bool(d["havoc_flags"][f]) for f in HAVOC_FLAGS),
        charting={pid: PlayerCharting(**c) for pid, c in d.get("charting", {}).items()},
        **fields_,
    )


def write_play_store(plays: Iterable[PlayRecord], stream: TextIO, provenance: dict | None = None) -> None:
    """One JSON object per line; an optional first line holds provenance."""
    if provenance is not None:
        stream.write(json.dumps({"provenance": provenance}) + "\n")
    for play in plays:
        stream.write(json.dumps(play_to_dict(play), separators=(",", ":")) + "\n")


def read_play_store(stream) -> list[PlayRecord]:
    plays = []
    with _text_stream(stream) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            if "provenance" in d and len(d) == 1:
                continue
            plays.append(play_from_dict(d))
    return plays


def tracking_csv_text(plays: Iterable[PlayRecord]) -> str:
    buf = io.StringIO()
    write_tracking_csv(plays, buf)
    return buf.getvalue()
