"""Posterior summaries, quarterback leaderboards and havoc correlations.

Everything here is post-processing over draw arrays and parsed plays; the
outputs are plot-ready tables rather than figures.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .errors import CorrelationError, SnapTimingError
from .ingest import PlayRecord
from .model import ParameterLayout

log = logging.getLogger(__name__)

DIRECTIONS = ("paper", "variance")
DIRECTION_NOTE = (
    "Shape effects u_q raise log alpha, and the conditional variance is mu^2 / alpha, "
    "so a larger u_q means less dispersed snap timing at a fixed mean. The 'paper' "
    "ordering puts the largest u_q first and reads it as the most variable timing; "
    "the 'variance' ordering ranks by implied dispersion instead."
)


@dataclass(frozen=True)
class PosteriorSummary:
    name: str
    mean: float
    sd: float
    ci_lower: float
    ci_upper: float

    def as_row(self) -> list:
        return [self.name, self.mean, self.sd, self.ci_lower, self.ci_upper]


def _flatten(draws) -> np.ndarray:
    arr = np.asarray(draws, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim == 3:
        arr = arr.reshape(-1, arr.shape[2])
    if arr.ndim != 2:
        raise SnapTimingError("draws must be 1-, 2- or 3-dimensional")
    return arr


def summarize(draws, names: Sequence[str], level: float = 0.95) -> list[PosteriorSummary]:
    """Mean, SD and equal-tailed credible interval per parameter.

    ``draws`` is ``(n_draws, dim)`` or ``(n_chains, n_draws, dim)``; chains
    are pooled before summarizing.
    """
    arr = _flatten(draws)
    if arr.shape[0] == 0:
        raise SnapTimingError("summarize needs at least one draw")
    if len(names) != arr.shape[1]:
        raise SnapTimingError(f"{len(names)} names for {arr.shape[1]} parameters")
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(arr, [tail, 1.0 - tail], axis=0)
    mean = arr.mean(axis=0)
    sd = arr.std(axis=0, ddof=1) if arr.shape[0] > 1 else np.zeros(arr.shape[1])
    return [PosteriorSummary(n, float(mean[j]), float(sd[j]), float(lo[j]), float(hi[j])) for j, n in enumerate(names)]


def fixed_effects_table(draws, layout: ParameterLayout, level: float = 0.95) -> list[PosteriorSummary]:
    """Intercept and fixed-effect coefficients, one summary per row."""
    p = layout.unpack(_flatten(draws))
    cols = np.column_stack([p["gamma0"], p["beta"]])
    names = ["Intercept", *(layout.covariate_names or [f"beta[{j}]" for j in range(layout.n_covariates)])]
    return summarize(cols, names, level)


def sd_table(draws, layout: ParameterLayout, level: float = 0.95) -> list[PosteriorSummary]:
    """Group standard deviations on their natural (positive) scale."""
    real = layout.realize(_flatten(draws))
    cols = np.column_stack([real[k] for k in ("sigma_q", "sigma_m", "sigma_d", "tau_q")])
    return summarize(cols, ["sigma_q", "sigma_m", "sigma_d", "tau_q"], level)


@dataclass(frozen=True)
class LeaderboardEntry:
    rank: int
    player_id: str
    n_plays: int
    summary: PosteriorSummary


def _ranked_board(effect_draws, ids, counts, min_count, descending: bool, what: str) -> list[LeaderboardEntry]:
    arr = _flatten(effect_draws)
    if arr.shape[1] != len(ids):
        raise SnapTimingError(f"{arr.shape[1]} effect columns for {len(ids)} identifiers")
    keep = [j for j, pid in enumerate(ids) if counts.get(pid, 0) >= min_count]
    if not keep:
        log.warning("%s: no player has at least %d plays", what, min_count)
        return []
    summaries = summarize(arr[:, keep], [ids[j] for j in keep])
    sign = -1.0 if descending else 1.0
    # stable ties: by identifier
    order = sorted(range(len(keep)), key=lambda k: (sign * summaries[k].mean, summaries[k].name))
    return [
        LeaderboardEntry(rank + 1, summaries[k].name, int(counts[summaries[k].name]), summaries[k])
        for rank, k in enumerate(order)
    ]


def qb_leaderboard(
    shape_draws,
    qb_ids: Sequence[str],
    attempts: Mapping[str, int],
    min_attempts: int = 50,
    direction: str = "paper",
) -> list[LeaderboardEntry]:
    """Quarterbacks ordered by the posterior mean of their shape effect.

    Parameters
    ----------
    shape_draws
        Realized ``u_q`` draws, ``(n_draws, n_qb)`` or chain-stacked.
    qb_ids
        Identifier for each column.
    attempts
        Plays per quarterback; those under ``min_attempts`` are dropped.
    direction
        ``"paper"`` puts the largest mean first; ``"variance"`` puts the
        smallest first, since a small ``u_q`` implies the widest spread.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    return _ranked_board(shape_draws, qb_ids, attempts, min_attempts, direction == "paper", "qb_leaderboard")


def qb_mean_board(mean_draws, qb_ids, attempts, min_attempts: int = 50) -> list[LeaderboardEntry]:
    """Quarterbacks ordered by their mean-level effect ``b_q`` (largest first)."""
    return _ranked_board(mean_draws, qb_ids, attempts, min_attempts, True, "qb_mean_board")


def receiver_board(motion_draws, motion_ids, motions, min_motions: int = 20) -> list[LeaderboardEntry]:
    """Motion players with at least ``min_motions`` plays, by ``b_m`` (largest first)."""
    return _ranked_board(motion_draws, motion_ids, motions, min_motions, True, "receiver_board")


@dataclass(frozen=True)
class HavocRecord:
    qb_id: str
    n_plays: int
    havoc_rate_all_pass: float
    havoc_rate_motion: float
    n_pass_plays: int


def _is_motion_play(play: PlayRecord) -> bool:
    return play.is_pass_play and play.motion_at_snap and play.route_run


def havoc_rates(
    plays: Iterable[PlayRecord], min_attempts: int = 50, motion_keys: Iterable[tuple[str, str]] | None = None
) -> list[HavocRecord]:
    """Per-QB fraction of plays on which the defense logged any havoc event.

    Rates are computed over every passing play and over the motion-play
    subset. A play counts once no matter how many havoc flags it carries.
    ``n_plays`` is the motion-play count used for the ``min_attempts``
    filter; ``motion_keys`` overrides which plays form that subset.
    """
    keys = set(motion_keys) if motion_keys is not None else None
    tallies: dict[str, list[int]] = {}
    for play in plays:
        if not play.is_pass_play or play.qb_id is None:
            continue
        t = tallies.setdefault(play.qb_id, [0, 0, 0, 0])
        hit = int(play.any_havoc)
        t[0] += 1
        t[1] += hit
        in_motion = play.key in keys if keys is not None else _is_motion_play(play)
        if in_motion:
            t[2] += 1
            t[3] += hit
    out = []
    for qb in sorted(tallies):
        n_pass, h_pass, n_motion, h_motion = tallies[qb]
        if n_motion == 0 or n_motion < min_attempts:
            continue
        out.append(HavocRecord(qb, n_motion, h_pass / n_pass, h_motion / n_motion, n_pass))
    return out


def motion_rates(plays: Iterable[PlayRecord]) -> dict[str, float]:
    """Per-QB fraction of passing plays with a receiver in motion at the snap."""
    counts: dict[str, list[int]] = {}
    for play in plays:
        if not play.is_pass_play or play.qb_id is None:
            continue
        c = counts.setdefault(play.qb_id, [0, 0])
        c[0] += 1
        c[1] += int(play.motion_at_snap)
    return {qb: m / n for qb, (n, m) in sorted(counts.items())}


def correlate(x_by_qb: Mapping[str, float], y_by_qb: Mapping[str, float]) -> float:
    """Pearson correlation over the keys both mappings share.

    Raises
    ------
    CorrelationError
        Fewer than three shared keys, or either series is constant.
    """
    shared = sorted(set(x_by_qb) & set(y_by_qb))
    if len(shared) < 3:
        raise CorrelationError(f"need at least 3 paired values, got {len(shared)}")
    x = np.array([x_by_qb[k] for k in shared], dtype=float)
    y = np.array([y_by_qb[k] for k in shared], dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise CorrelationError("correlation is undefined for a constant series")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def board_means(board: Sequence[LeaderboardEntry]) -> dict[str, float]:
    return {e.player_id: e.summary.mean for e in board}


def correlation_report(
    shape_means: Mapping[str, float],
    havoc: Sequence[HavocRecord],
    mean_effects: Mapping[str, float] | None = None,
    motion_rate: Mapping[str, float] | None = None,
) -> dict:
    """Every pairwise correlation the havoc analysis reports.

    Pairs that cannot be computed (too few QBs or a constant series) are
    reported as ``None`` with the reason.
    """
    series = {
        "havoc_all_pass": {h.qb_id: h.havoc_rate_all_pass for h in havoc},
        "havoc_motion": {h.qb_id: h.havoc_rate_motion for h in havoc},
    }
    pairs = [("shape_vs_havoc_all_pass", shape_means, series["havoc_all_pass"]),
             ("shape_vs_havoc_motion", shape_means, series["havoc_motion"])]
    if mean_effects is not None:
        pairs.append(("mean_vs_shape", mean_effects, shape_means))
    if motion_rate is not None:
        pairs.append(("shape_vs_motion_rate", shape_means, motion_rate))
        pairs.append(("motion_rate_vs_havoc_all_pass", motion_rate, series["havoc_all_pass"]))
    out = {}
    for name, x, y in pairs:
        try:
            out[name] = {"r": correlate(x, y), "n": len(set(x) & set(y))}
        except CorrelationError as exc:
            out[name] = {"r": None, "n": len(set(x) & set(y)), "reason": str(exc)}
    return out


# ---------------------------------------------------------------- writers


def _provenance_line(stream: TextIO, provenance: dict | None) -> None:
    if provenance is not None:
        stream.write("# " + json.dumps(provenance, sort_keys=True) + "\n")


def write_summary_table(summaries: Sequence[PosteriorSummary], stream: TextIO, provenance: dict | None = None) -> None:
    """Parameter, mean, SD and interval bounds, one row per parameter."""
    _provenance_line(stream, provenance)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["parameter", "mean", "sd", "lower", "upper"])
    for s in summaries:
        writer.writerow([s.name, f"{s.mean:.6g}", f"{s.sd:.6g}", f"{s.ci_lower:.6g}", f"{s.ci_upper:.6g}"])


def write_leaderboard(
    board: Sequence[LeaderboardEntry], stream: TextIO, direction: str = "paper", provenance: dict | None = None
) -> None:
    _provenance_line(stream, provenance)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["rank", "player_id", "n_plays", "mean", "sd", "lower", "upper", "direction"])
    for e in board:
        s = e.summary
        writer.writerow([e.rank, e.player_id, e.n_plays, f"{s.mean:.6g}", f"{s.sd:.6g}",
                         f"{s.ci_lower:.6g}", f"{s.ci_upper:.6g}", direction])
    if board and direction in DIRECTIONS:
        stream.write(f"# note: {DIRECTION_NOTE}\n")


def write_havoc_scatter(
    havoc: Sequence[HavocRecord], shape_means: Mapping[str, float], stream: TextIO, provenance: dict | None = None
) -> None:
    """QB shape-effect mean against both havoc rates."""
    _provenance_line(stream, provenance)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["qb_id", "shape_mean", "havoc_rate_all_pass", "havoc_rate_motion", "n_plays", "n_pass_plays"])
    for h in havoc:
        if h.qb_id not in shape_means:
            continue
        writer.writerow([h.qb_id, f"{shape_means[h.qb_id]:.6g}", f"{h.havoc_rate_all_pass:.6g}",
                         f"{h.havoc_rate_motion:.6g}", h.n_plays, h.n_pass_plays])


def write_correlation_json(report: dict, stream: TextIO, provenance: dict | None = None) -> None:
    out = {"correlations": report, "leaderboard_direction_note": DIRECTION_NOTE}
    if provenance is not None:
        out["provenance"] = provenance
    json.dump(out, stream, indent=2)


def summaries_to_dicts(summaries: Sequence[PosteriorSummary]) -> list[dict]:
    return [asdict(s) for s in summaries]
