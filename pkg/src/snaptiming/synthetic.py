"""Synthetic data with known ground truth.

Two generators live here. ``generate_model_dataset`` simulates the Gamma
multilevel model directly and feeds parameter-recovery experiments.
``generate_tracking_corpus`` writes raw 10 Hz tracking and charting CSVs
whose motion starts, motion archetypes and play flags are known, so the
ingest, detection and clustering stages can be checked end to end.
"""

from __future__ import annotations

import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .analysis import qb_leaderboard
from .errors import SnapTimingError
from .ingest import CHARTING_WRITE_COLUMNS, FIELD_WIDTH, HAVOC_FLAGS, TRACKING_COLUMNS, IngestResult, parse_tracking
from .inference.hmc import SamplerConfig
from .model import Design, ModelConfig, covariate_names, covariate_row, fit

log = logging.getLogger(__name__)

# Posterior means of the fixed effects reported for the real sample, in
# covariate order (down 2..4, play clock, timeouts 1..3, TE, WR, motion
# players since line set, motion clusters 2..6).
REFERENCE_BETA = (
    0.068, 0.192, 0.150,
    0.029,
    -0.278, -0.143, -0.151,
    0.531, 0.320,
    -0.021,
    0.039, 0.560, -0.029, -0.192, 0.154,
)


# ---------------------------------------------------------- model datasets


@dataclass(frozen=True)
class ModelTruth:
    """Generative settings for model-consistent datasets.

    ``u_q`` pins the quarterback shape effects instead of drawing them from
    ``Normal(0, tau_q)``; its length overrides ``n_qb``.
    """

    gamma0: float = 2.409
    beta: tuple[float, ...] = REFERENCE_BETA
    sigma_q: float = 0.093
    sigma_m: float = 0.151
    sigma_d: float = 0.029
    tau_q: float = 0.297
    psi0: float = 0.9
    n_qb: int = 40
    n_motion: int = 150
    n_defense: int = 32
    n_clusters: int = 6
    play_clock_range: tuple[float, float] = (5.0, 25.0)
    motion_count_levels: tuple[int, ...] = (1, 2, 3)
    u_q: tuple[float, ...] | None = None

    def __post_init__(self):
        for name in ("sigma_q", "sigma_m", "sigma_d", "tau_q"):
            if not getattr(self, name) >= 0:
                raise SnapTimingError(f"{name} must be non-negative, got {getattr(self, name)}")
        if len(self.beta) != 10 + self.n_clusters - 1:
            raise SnapTimingError(f"beta needs {10 + self.n_clusters - 1} entries, got {len(self.beta)}")
        if min(self.groups) < 1:
            raise SnapTimingError("every group needs at least one member")
        lo, hi = self.play_clock_range
        if not 0 <= lo <= hi:
            raise SnapTimingError("play_clock_range must satisfy 0 <= lo <= hi")

    @property
    def groups(self) -> tuple[int, int, int]:
        n_qb = len(self.u_q) if self.u_q is not None else self.n_qb
        return n_qb, self.n_motion, self.n_defense


@dataclass
class GroundTruth:
    """Realized parameters and effects behind one generated dataset."""

    gamma0: float
    beta: np.ndarray
    sigma_q: float
    sigma_m: float
    sigma_d: float
    tau_q: float
    psi0: float
    b_q: np.ndarray
    b_m: np.ndarray
    b_d: np.ndarray
    u_q: np.ndarray
    seed: int
    covariate_names: tuple[str, ...] = ()

    def values(self) -> dict[str, float]:
        """Scalar truth values keyed the same way as recovery estimates."""
        out = {k: float(getattr(self, k)) for k in ("gamma0", "psi0", "sigma_q", "sigma_m", "sigma_d", "tau_q")}
        for name, b in zip(self.covariate_names, self.beta):
            out[f"beta[{name}]"] = float(b)
        return out

    def to_dict(self) -> dict:
        d = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(self).items()}
        d["covariate_names"] = list(self.covariate_names)
        return d


def _uniform_covariates(truth: ModelTruth, n: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = truth.play_clock_range
    down = rng.integers(1, 5, n)
    timeouts = rng.integers(0, 4, n)
    position = rng.choice(np.array(["RB", "TE", "WR"]), n)
    clock = rng.uniform(lo, hi, n)
    n_motion = rng.choice(np.asarray(truth.motion_count_levels), n)
    cluster = rng.integers(1, truth.n_clusters + 1, n)
    return np.array([
        covariate_row(int(down[i]), float(clock[i]), int(timeouts[i]), str(position[i]), int(n_motion[i]),
                      int(cluster[i]), truth.n_clusters)
        for i in range(n)
    ]).reshape(n, 10 + truth.n_clusters - 1)


def generate_model_dataset(truth: ModelTruth, n_plays: int, seed: int) -> tuple[Design, GroundTruth]:
    """Simulate snap timings from the Gamma multilevel model.

    Covariate levels are uniform, the play clock is uniform on
    ``truth.play_clock_range`` and group memberships are uniform. Each
    continuous draw is floored at one frame and rounded to 0.1 frame.
    """
    if n_plays < 1:
        raise SnapTimingError("n_plays must be >= 1")
    rng = np.random.default_rng(seed)
    n_qb, n_m, n_d = truth.groups
    X = _uniform_covariates(truth, n_plays, rng)
    qb = rng.integers(0, n_qb, n_plays)
    motion = rng.integers(0, n_m, n_plays)
    defense = rng.integers(0, n_d, n_plays)
    b_q = rng.normal(0.0, 1.0, n_qb) * truth.sigma_q
    b_m = rng.normal(0.0, 1.0, n_m) * truth.sigma_m
    b_d = rng.normal(0.0, 1.0, n_d) * truth.sigma_d
    u_q = np.asarray(truth.u_q, dtype=float) if truth.u_q is not None else rng.normal(0.0, 1.0, n_qb) * truth.tau_q
    beta = np.asarray(truth.beta, dtype=float)
    mu = np.exp(truth.gamma0 + X @ beta + b_q[qb] + b_m[motion] + b_d[defense])
    alpha = np.exp(truth.psi0 + u_q[qb])
    raw = rng.gamma(alpha, mu / alpha)
    delta = np.round(np.maximum(raw, 1.0), 1)
    names = covariate_names(truth.n_clusters)
    design = Design(
        delta, X, qb, motion, defense, names,
        tuple(f"qb{k:03d}" for k in range(n_qb)),
        tuple(f"mp{k:03d}" for k in range(n_m)),
        tuple(f"def{k:02d}" for k in range(n_d)),
        [("sim", str(i + 1)) for i in range(n_plays)],
    )
    gt = GroundTruth(
        truth.gamma0, beta, truth.sigma_q, truth.sigma_m, truth.sigma_d, truth.tau_q, truth.psi0,
        b_q, b_m, b_d, u_q, seed, names,
    )
    return design, gt


# ------------------------------------------------------ recovery experiment


RECOVERY_PARAMETERS = ("gamma0", "psi0", "tau_q", "sigma_m", "sigma_q", "sigma_d")


@dataclass
class ParameterRecovery:
    truth: float
    mean: float
    lower: float
    upper: float

    @property
    def covered(self) -> bool:
        return self.lower <= self.truth <= self.upper


@dataclass
class ReplicateResult:
    index: int
    data_seed: int
    sampler_seed: int
    max_rhat: float
    divergences: int
    flagged: bool
    estimates: dict[str, ParameterRecovery]

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "data_seed": self.data_seed,
            "sampler_seed": self.sampler_seed,
            "max_rhat": self.max_rhat if math.isfinite(self.max_rhat) else None,
            "divergences": self.divergences,
            "flagged": self.flagged,
            "estimates": {k: {**asdict(v), "covered": v.covered} for k, v in self.estimates.items()},
        }


@dataclass
class RecoveryReport:
    level: float
    n_plays: int
    seed: int
    rhat_limit: float
    replicates: list[ReplicateResult] = field(default_factory=list)

    @property
    def used(self) -> list[ReplicateResult]:
        return [r for r in self.replicates if not r.flagged]

    @property
    def n_flagged(self) -> int:
        return sum(r.flagged for r in self.replicates)

    def covered_count(self, name: str) -> int:
        return sum(r.estimates[name].covered for r in self.used)

    def coverage(self, name: str) -> float:
        used = self.used
        return self.covered_count(name) / len(used) if used else float("nan")

    @property
    def parameters(self) -> list[str]:
        return list(self.replicates[0].estimates) if self.replicates else []

    @property
    def coverage_fraction(self) -> float:
        """Share of (replicate, parameter) intervals that cover the truth."""
        hits = [e.covered for r in self.used for e in r.estimates.values()]
        return sum(hits) / len(hits) if hits else float("nan")

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "n_plays": self.n_plays,
            "seed": self.seed,
            "rhat_limit": self.rhat_limit,
            "n_replicates": len(self.replicates),
            "n_flagged": self.n_flagged,
            "coverage": {k: {"covered": self.covered_count(k), "used": len(self.used)} for k in self.parameters},
            "coverage_fraction": None if not self.used else self.coverage_fraction,
            "replicates": [r.to_dict() for r in self.replicates],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        used = len(self.used)
        lines = [
            f"recovery: {len(self.replicates)} replicates, n={self.n_plays}, "
            f"{int(round(self.level * 100))}% intervals, {self.n_flagged} flagged (R-hat > {self.rhat_limit})",
            f"{'parameter':<24}{'covered':>10}{'mean est':>12}{'truth':>10}",
        ]
        for name in self.parameters:
            means = [r.estimates[name].mean for r in self.used]
            truth = self.replicates[0].estimates[name].truth
            avg = f"{np.mean(means):.4f}" if means else "nan"
            lines.append(f"{name:<24}{self.covered_count(name):>5}/{used:<4}{avg:>12}{truth:>10.4f}")
        return "\n".join(lines) + "\n"


def _replicate_seeds(seed: int, n: int) -> list[tuple[int, int]]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [tuple(int(v) for v in c.generate_state(2)) for c in children]


def _scalar_draws(result, names: Sequence[str]) -> dict[str, np.ndarray]:
    real = result.realized()
    out = {}
    for name in names:
        if name.startswith("beta["):
            j = result.layout.covariate_names.index(name[5:-1])
            out[name] = real["beta"][:, j]
        else:
            out[name] = real[name]
    return out


def recovery_experiment(
    truth: ModelTruth,
    n_plays: int,
    n_replicates: int,
    sampler_config: SamplerConfig,
    seed: int = 0,
    level: float = 0.9,
    model_config: ModelConfig | None = None,
    rhat_limit: float = 1.05,
    parameters: Sequence[str] = RECOVERY_PARAMETERS,
    progress: Callable[[ReplicateResult], None] | None = None,
) -> RecoveryReport:
    """Generate, fit and score interval coverage for each replicate.

    Replicates whose largest split R-hat exceeds ``rhat_limit`` are flagged
    and left out of the coverage counts.
    """
    report = RecoveryReport(level, n_plays, seed, rhat_limit)
    tail = (1.0 - level) / 2.0
    for i, (data_seed, sampler_seed) in enumerate(_replicate_seeds(seed, n_replicates)):
        design, gt = generate_model_dataset(truth, n_plays, data_seed)
        result = fit(design, replace(sampler_config, seed=sampler_seed), model_config)
        true_values = gt.values()
        estimates = {}
        for name, draws in _scalar_draws(result, parameters).items():
            lo, hi = np.quantile(draws, [tail, 1.0 - tail])
            estimates[name] = ParameterRecovery(true_values[name], float(draws.mean()), float(lo), float(hi))
        max_rhat = result.diagnostics.max_rhat
        rep = ReplicateResult(
            i, data_seed, sampler_seed, max_rhat, int(result.draws.divergences.sum()),
            not max_rhat <= rhat_limit, estimates,
        )
        if rep.flagged:
            log.warning("replicate %d flagged: max R-hat %.3f", i, max_rhat)
        report.replicates.append(rep)
        if progress is not None:
            progress(rep)
    return report


@dataclass
class LeaderboardTrial:
    index: int
    star_index: int
    star_rank: int
    star_mean: float
    max_rhat: float


def leaderboard_experiment(
    n_plays: int,
    n_replicates: int,
    sampler_config: SamplerConfig,
    seed: int = 0,
    star_effect: float = 0.6,
    n_qb: int = 20,
    truth: ModelTruth | None = None,
) -> list[LeaderboardTrial]:
    """Plant one quarterback with a large shape effect and record its rank.

    Every other quarterback gets a zero shape effect. The planted index is
    drawn per replicate so rank cannot come from position in the ordering.
    """
    base = truth or ModelTruth()
    trials = []
    for i, (data_seed, sampler_seed) in enumerate(_replicate_seeds(seed, n_replicates)):
        star = int(np.random.default_rng(data_seed).integers(n_qb))
        u = np.zeros(n_qb)
        u[star] = star_effect
        design, _ = generate_model_dataset(replace(base, u_q=tuple(u)), n_plays, data_seed)
        result = fit(design, replace(sampler_config, seed=sampler_seed))
        u_draws = result.realized()["u_q"]
        attempts = {qid: int(c) for qid, c in zip(design.qb_ids, np.bincount(design.qb, minlength=n_qb))}
        board = qb_leaderboard(u_draws, design.qb_ids, attempts, min_attempts=0, direction="paper")
        rank = next(e.rank for e in board if e.player_id == design.qb_ids[star])
        trials.append(LeaderboardTrial(i, star, rank, float(u_draws[:, star].mean()), result.diagnostics.max_rhat))
    return trials


# --------------------------------------------------- motion archetypes


@dataclass(frozen=True)
class Archetype:
    """Nominal feature geometry of one motion type (yards, pre-mirroring).

    ``mean`` and ``sd`` order: b_sideline, b_endzone, m_sideline,
    l_sideline. ``corr`` couples the snap and crossing lateral offsets.
    """

    name: str
    mean: tuple[float, float, float, float]
    sd: tuple[float, float, float, float]
    corr: float
    crosses_los: bool
    position: str
    start_endzone: float
    curve: float = 0.0

    def covariance(self) -> np.ndarray:
        sd = np.asarray(self.sd)
        R = np.eye(4)
        R[0, 3] = R[3, 0] = self.corr
        return R * np.outer(sd, sd)


ARCHETYPES = (
    Archetype("jet", (-4.0, -1.0, 11.0, -12.0), (1.2, 0.3, 1.5, 2.0), 0.5, False, "WR", -1.0),
    Archetype("orbit", (3.0, -5.5, 8.0, 9.0), (1.0, 0.6, 1.2, 1.5), -0.4, False, "WR", -1.0, curve=-4.0),
    Archetype("glide", (-2.5, -1.2, 3.5, -6.0), (0.8, 0.3, 0.6, 1.2), 0.6, True, "TE", -1.2),
    Archetype("shift_in", (7.0, -1.0, 14.0, 13.0), (1.2, 0.3, 1.5, 1.8), 0.3, True, "WR", -1.0),
    Archetype("shift_out", (14.0, -1.0, 6.0, 19.0), (1.5, 0.3, 1.0, 2.0), -0.3, True, "WR", -1.0),
    Archetype("backfield", (8.0, -4.0, 2.0, 15.0), (1.0, 0.5, 0.4, 2.0), 0.4, True, "RB", -5.0),
)


def _sample_features(arch: Archetype, rng: np.random.Generator) -> np.ndarray:
    L = np.linalg.cholesky(arch.covariance())
    while True:
        f = np.asarray(arch.mean) + L @ rng.standard_normal(4)
        # keep the start on the positive side and the snap spot behind the line
        if f[2] > 0.3 and f[1] < -0.3:
            return f


def feature_benchmark(n_per_archetype: int = 100, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Feature rows drawn straight from the archetype Gaussians.

    Returns ``(X, labels)`` with 0-based archetype labels.
    """
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for k, arch in enumerate(ARCHETYPES):
        for _ in range(n_per_archetype):
            rows.append(_sample_features(arch, rng))
            labels.append(k)
    return np.array(rows), np.array(labels)


# ---------------------------------------------------- tracking corpus


@dataclass(frozen=True)
class CorpusConfig:
    qualifying_fraction: float = 1.0
    missing_tag_prob: float = 0.2
    shift_prob: float = 0.1
    left_prob: float = 0.5
    havoc_prob: float = 0.3
    ramp_rate: float = 0.6
    tag_ratio: float = 0.45
    speed_noise: float = 0.03
    n_qb: int = 12
    n_motion: int = 60
    n_teams: int = 32
    archetype_weights: tuple[float, ...] | None = None
    balanced: bool = False

    def __post_init__(self):
        if not 0.0 <= self.qualifying_fraction <= 1.0:
            raise SnapTimingError("qualifying_fraction must lie in [0, 1]")
        if self.speed_noise > 0.1:
            raise SnapTimingError("speed_noise above 0.1 breaks the signal-to-noise floor of 10")


@dataclass
class PlayTruth:
    game_id: str
    play_id: str
    t_lineset: int
    t_motion: int
    t_snap: int
    archetype: int
    qualifying: bool
    tagged: bool
    only_mover: bool
    direction: str
    havoc_prob: float
    havoc: bool
    features: tuple[float, float, float, float]

    @property
    def key(self) -> tuple[str, str]:
        return (self.game_id, self.play_id)

    @property
    def delta(self) -> int:
        return self.t_snap - self.t_motion


@dataclass
class TrackingCorpus:
    tracking_csv: str
    charting_csv: str
    truth: list[PlayTruth]
    seed: int
    config: CorpusConfig

    def parse(self) -> IngestResult:
        return parse_tracking(io.StringIO(self.tracking_csv), io.StringIO(self.charting_csv))

    def truth_by_key(self) -> dict[tuple[str, str], PlayTruth]:
        return {t.key: t for t in self.truth}

    def truth_dict(self) -> dict:
        return {"seed": self.seed, "config": asdict(self.config), "plays": [asdict(t) for t in self.truth]}

    def write(self, out_dir, provenance: dict | None = None) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"tracking": out / "tracking.csv", "charting": out / "charting.csv", "truth": out / "truth.json"}
        paths["tracking"].write_text(self.tracking_csv)
        paths["charting"].write_text(self.charting_csv)
        truth = self.truth_dict()
        if provenance is not None:
            truth["provenance"] = provenance
        paths["truth"].write_text(json.dumps(truth, indent=2))
        return paths


def _logistic(t: np.ndarray, center: float, rate: float) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-rate * (t - center)))


def _headings(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    dx = np.diff(x, prepend=x[0])
    dy = np.diff(y, prepend=y[0])
    ang = np.degrees(np.arctan2(dx, dy)) % 360.0
    return ang


def _interp(frames: np.ndarray, knots_t: Sequence[float], knots_v: Sequence[float]) -> np.ndarray:
    return np.interp(frames, np.asarray(knots_t, dtype=float), np.asarray(knots_v, dtype=float))


class _PlayBuilder:
    """Builds the normalized-frame tracks of one synthetic play."""

    def __init__(self, rng: np.random.Generator, cfg: CorpusConfig):
        self.rng = rng
        self.cfg = cfg

    def timeline(self) -> dict:
        rng = self.rng
        t_lineset = int(rng.integers(15, 31))
        t_motion = t_lineset + int(rng.integers(4, 21))
        delta = int(np.clip(round(rng.gamma(2.5, 18.0 / 2.5)), 5, 80))
        t_snap = t_motion + delta
        t_qb = t_snap + int(rng.integers(18, 46))
        return {"lineset": t_lineset, "motion": t_motion, "snap": t_snap, "qb": t_qb, "end": t_snap + 50}

    def motion_track(self, feat, arch: Archetype, side: int, los: float, yc: float, tl: dict, frames: np.ndarray):
        rng, cfg = self.rng, self.cfg
        b_side, b_end, m_side, l_side = feat
        t_m, t_s = tl["motion"], tl["snap"]
        start = np.array([los + arch.start_endzone, yc + side * m_side])
        snap = np.array([los + b_end, yc + side * b_side])

        # logistic speed ramp; the tag sits where speed first reaches tag_ratio of the ramp
        center = t_m + math.log(1.0 / cfg.tag_ratio - 1.0) / cfg.ramp_rate
        ramp = _logistic(frames.astype(float), center, cfg.ramp_rate)
        pre = frames <= t_s
        progress = np.cumsum(np.where(pre, ramp, 0.0))
        progress = progress / progress[frames == t_s][0]
        progress = np.minimum(progress, 1.0)
        # quadratic Bezier from start to snap spot; ``curve`` bends it toward the backfield
        ctrl = 0.5 * (start + snap) + np.array([arch.curve, 0.0])
        u = progress[:, None]
        path = (1 - u) ** 2 * start + 2 * (1 - u) * u * ctrl + u**2 * snap
        seg = np.linalg.norm(np.diff(path[pre], axis=0), axis=1).sum()
        v_peak = max(seg / (0.1 * np.sum(ramp[pre])), 0.5)
        speed = v_peak * ramp

        post = frames > t_s
        l_spot = yc + side * l_side
        if arch.crosses_los:
            t_c = t_s + int(rng.integers(6, 21))
            kx = [t_s, t_c - 1, t_c, tl["end"]]
            vx = [snap[0], los - 0.1, los + 0.6, los + 0.6 + 0.6 * (tl["end"] - t_c)]
            ky = [t_s, t_c - 1, tl["end"]]
            vy = [snap[1], l_spot, l_spot]
        else:
            t_f = min(tl["qb"], t_s + 30)
            kx = [t_s, t_f, tl["end"]]
            vx = [snap[0], min(snap[0], los - 1.0), min(snap[0], los - 1.0)]
            ky = [t_s, t_f, tl["end"]]
            vy = [snap[1], l_spot, l_spot]
        path[post, 0] = _interp(frames[post], kx, vx)
        path[post, 1] = _interp(frames[post], ky, vy)
        step = np.linalg.norm(np.diff(path, axis=0, prepend=path[:1]), axis=1)
        speed = np.where(post, step / 0.1, speed)
        noise = rng.normal(0.0, cfg.speed_noise * v_peak, len(frames))
        speed = np.abs(speed + noise)
        return path, speed

    def stationary(self, x: float, y: float, frames: np.ndarray, jitter: float = 0.02):
        n = len(frames)
        px = x + self.rng.normal(0.0, jitter, n)
        py = y + self.rng.normal(0.0, jitter, n)
        s = np.abs(self.rng.normal(0.0, 0.05, n))
        return np.column_stack([px, py]), s

    def shifter(self, los: float, yc: float, side: int, tl: dict, frames: np.ndarray):
        y0 = yc - side * 8.0
        y1 = yc - side * 5.0
        t0, t1 = tl["lineset"] + 1, max(tl["lineset"] + 3, tl["motion"] - 2)
        y = _interp(frames, [t0, t1], [y0, y1])
        x = np.full(len(frames), los - 1.0)
        step = np.abs(np.diff(y, prepend=y[0]))
        return np.column_stack([x, y]), step / 0.1


def _raw_rows(game, play, pid, frames, path, speed, events, direction) -> list[str]:
    x, y = path[:, 0], path[:, 1]
    x = np.clip(x, 0.5, 119.5)
    y = np.clip(y, 0.5, FIELD_WIDTH - 0.5)
    dis = np.linalg.norm(np.diff(np.column_stack([x, y]), axis=0, prepend=np.column_stack([x, y])[:1]), axis=1)
    acc = np.abs(np.diff(speed, prepend=speed[0])) / 0.1
    heading = _headings(x, y)
    if direction == "left":
        x, y = 120.0 - x, FIELD_WIDTH - y
        heading = (heading + 180.0) % 360.0
    rows = []
    for i, f in enumerate(frames):
        ang = round(float(heading[i]), 2) % 360.0
        rows.append(
            f"{game},{play},{pid},{int(f)},{direction},{x[i]:.2f},{y[i]:.2f},{speed[i]:.2f},{acc[i]:.2f},"
            f"{dis[i]:.2f},{ang:.2f},{ang:.2f},{events.get(int(f), 'NA')}"
        )
    return rows


def _bool(v: bool) -> str:
    return "TRUE" if v else "FALSE"


def generate_tracking_corpus(n_plays: int, seed: int, config: CorpusConfig | None = None) -> TrackingCorpus:
    """Raw tracking and charting CSV text plus per-play ground truth.

    Every play carries a center, a quarterback and a motion player (and
    sometimes a second offensive player who shifts after the line set).
    Event tags are written on every track, as in the public data.
    """
    if n_plays < 1:
        raise SnapTimingError("n_plays must be >= 1")
    cfg = config or CorpusConfig()
    rng = np.random.default_rng(seed)
    builder = _PlayBuilder(rng, cfg)
    teams = [f"T{k:02d}" for k in range(cfg.n_teams)]
    n_qualify = int(round(cfg.qualifying_fraction * n_plays))
    qualifying = np.zeros(n_plays, dtype=bool)
    qualifying[rng.permutation(n_plays)[:n_qualify]] = True
    if cfg.balanced:
        labels = np.arange(n_plays) % len(ARCHETYPES)
    else:
        w = np.asarray(cfg.archetype_weights or [1.0] * len(ARCHETYPES), dtype=float)
        labels = rng.choice(len(ARCHETYPES), n_plays, p=w / w.sum())

    track_lines = [",".join(TRACKING_COLUMNS)]
    chart_lines = [",".join(CHARTING_WRITE_COLUMNS)]
    truths = []
    game = "2099090100"
    for i in range(n_plays):
        play = str(i + 1)
        arch = ARCHETYPES[labels[i]]
        feat = _sample_features(arch, rng)
        side = 1 if rng.uniform() < 0.5 else -1
        direction = "left" if rng.uniform() < cfg.left_prob else "right"
        los = float(rng.uniform(30.0, 75.0))
        yc = 26.65 + float(rng.uniform(-1.5, 1.5))
        tl = builder.timeline()
        frames = np.arange(1, tl["end"] + 1)
        shifted = rng.uniform() < cfg.shift_prob
        tagged = rng.uniform() >= cfg.missing_tag_prob
        is_q = bool(qualifying[i])
        # non-qualifying plays fail exactly one of the three filter flags
        failed = None if is_q else ("dropback", "motion", "route")[int(rng.integers(3))]

        events = {tl["lineset"]: "line_set", tl["snap"]: "ball_snap", tl["qb"]: "pass_forward"}
        if tagged:
            events[tl["motion"]] = "man_in_motion"

        offense = teams[int(rng.integers(len(teams)))]
        defense = teams[(teams.index(offense) + 1 + int(rng.integers(len(teams) - 1))) % len(teams)]
        qb_id = f"9{int(rng.integers(cfg.n_qb)):04d}"
        mp_id = f"8{int(rng.integers(cfg.n_motion)):04d}"
        c_id = f"7{i % 1000:04d}"
        shift_id = f"6{i % 1000:04d}"
        def_id = f"5{i % 1000:04d}"

        path, speed = builder.motion_track(feat, arch, side, los, yc, tl, frames)
        track_lines += _raw_rows(game, play, mp_id, frames, path, speed, events, direction)
        cpath, cs = builder.stationary(los, yc, frames)
        track_lines += _raw_rows(game, play, c_id, frames, cpath, cs, events, direction)
        qpath, qs = builder.stationary(los - 5.0, yc, frames)
        track_lines += _raw_rows(game, play, qb_id, frames, qpath, qs, events, direction)
        if shifted:
            spath, ss = builder.shifter(los, yc, side, tl, frames)
            track_lines += _raw_rows(game, play, shift_id, frames, spath, ss, events, direction)

        havoc = rng.uniform() < cfg.havoc_prob
        flags = [False] * len(HAVOC_FLAGS)
        if havoc:
            flags[int(rng.integers(len(HAVOC_FLAGS)))] = True
        down = int(rng.integers(1, 5))
        timeouts = int(rng.integers(0, 4))
        clock_snap = round(float(rng.uniform(2.0, 20.0)), 1)
        clock_motion = round(clock_snap + (tl["snap"] - tl["motion"]) / 10.0, 1)
        ctx = [
            _bool(failed != "dropback"), str(down), str(timeouts), offense, defense,
            f"{clock_motion}", f"{clock_snap}",
        ]

        def chart(pid, pos, team, at_snap, since, route, havoc_row=None):
            hv = [_bool(h) for h in (havoc_row or [False] * len(HAVOC_FLAGS))]
            chart_lines.append(",".join([
                game, play, pid, pos, team, _bool(at_snap), _bool(since), _bool(route),
                ctx[0], ctx[1], ctx[2], ctx[3], ctx[4], ctx[5], ctx[6], *hv,
            ]))

        in_motion = failed != "motion"
        chart(mp_id, arch.position, offense, in_motion, True, failed != "route")
        chart(c_id, "C", offense, False, False, False)
        chart(qb_id, "QB", offense, False, False, False)
        if shifted:
            chart(shift_id, "WR", offense, False, True, True)
        chart(def_id, "CB", defense, False, False, False, flags)

        truths.append(PlayTruth(
            game, play, tl["lineset"], tl["motion"], tl["snap"], int(labels[i]) + 1, is_q, tagged,
            not shifted, direction, cfg.havoc_prob, bool(havoc), tuple(float(v) for v in feat),
        ))

    return TrackingCorpus("\n".join(track_lines) + "\n", "\n".join(chart_lines) + "\n", truths, seed, cfg)
