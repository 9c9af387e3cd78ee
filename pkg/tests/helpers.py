"""Small constructors for hand-built plays used across test modules."""

import numpy as np

from snaptiming.ingest import PlayerTrack, PlayRecord


def make_track(player_id, role, frames, x, y, s, events):
    n = len(frames)
    x = np.broadcast_to(np.asarray(x, dtype=float), (n,)).copy()
    y = np.broadcast_to(np.asarray(y, dtype=float), (n,)).copy()
    s = np.asarray(s, dtype=float)
    z = np.zeros(n)
    ev = tuple(events.get(int(f)) for f in frames)
    return PlayerTrack(player_id, role, np.asarray(frames, dtype=np.int64), x, y, s, z, z.copy(), z.copy(), z.copy(), ev)


def make_play(
    speeds,
    t_lineset,
    t_snap,
    tag=None,
    only_mover=True,
    motion_xy=None,
    center_xy=(50.0, 26.65),
    qb_events=None,
    n_frames=None,
    play_id="1",
    **overrides,
):
    """A play whose motion player has the given speed trace over frames 1..n."""
    speeds = np.asarray(speeds, dtype=float)
    n = n_frames or len(speeds)
    frames = np.arange(1, n + 1)
    events = {t_lineset: "line_set", t_snap: "ball_snap"}
    if tag is not None:
        events[tag] = "man_in_motion"
    if qb_events:
        events.update(qb_events)
    if motion_xy is None:
        mx, my = np.full(n, 48.0), np.full(n, 20.0)
    else:
        mx, my = motion_xy
    tracks = (
        make_track("1", "quarterback", frames, center_xy[0] - 5.0, center_xy[1], np.zeros(n), events),
        make_track("2", "center", frames, center_xy[0], center_xy[1], np.zeros(n), events),
        make_track("3", "motion_player", frames, mx, my, speeds[:n], events),
    )
    fields = dict(
        game_id="g", play_id=play_id, tracks=tracks, qb_id="1", center_id="2", motion_player_id="3",
        motion_player_only_mover=only_mover, is_pass_play=True, motion_at_snap=True, route_run=True,
        n_motion_since_lineset=1 if only_mover else 2, down=1, timeouts_remaining=3, motion_position="WR",
        offense_team="A", defense_team="B", play_clock_at_snap=10.0,
    )
    fields.update(overrides)
    return PlayRecord(**fields)
