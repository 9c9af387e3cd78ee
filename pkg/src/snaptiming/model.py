"""Gamma multilevel model for snap timing with a quarterback-level shape.

For play ``i`` with quarterback ``q``, motion player ``m`` and defense ``d``::

    delta_i ~ Gamma(mean mu_i, shape alpha_i)
    log mu_i    = gamma0 + X_i beta + b_q + b_m + b_d
    log alpha_i = psi0 + u_q

Random effects are non-centered (``b_q = sigma_q * z_q`` and so on) and
every standard deviation is sampled on the log scale.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np
from numba import njit

from .errors import BuildError, DomainError
from .inference.diagnostics import Diagnostics, diagnose
from .inference.hmc import PosteriorDraws, SamplerConfig, hmc_sample
from .inference.special import digamma_scalar, lgamma, lgamma_scalar
from .ingest import PlayRecord

log = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)
DEFAULT_N_CLUSTERS = 6
SD_NAMES = ("sigma_q", "sigma_m", "sigma_d", "tau_q")


def covariate_names(n_clusters: int = DEFAULT_N_CLUSTERS) -> tuple[str, ...]:
    """Fixed-effect column labels; reference levels are omitted."""
    return (
        "down:2", "down:3", "down:4",
        "play_clock_at_motion",
        "timeouts:1", "timeouts:2", "timeouts:3",
        "position:TE", "position:WR",
        "motion_players_since_lineset",
    ) + tuple(f"motion:{c}" for c in range(2, n_clusters + 1))


@dataclass(frozen=True)
class ModelConfig:
    prior_scale_sd: float = 2.5
    prior_sd_fixed: float = 10.0
    dof: float = 3.0

    def __post_init__(self):
        if not (self.prior_scale_sd > 0 and self.prior_sd_fixed > 0 and self.dof > 0):
            raise ValueError("ModelConfig fields must all be positive")


@dataclass(frozen=True)
class DesignRow:
    delta: float
    covariates: np.ndarray
    qb_index: int
    motion_index: int
    defense_index: int


@dataclass
class Design:
    """Response, fixed-effect matrix and dense group indices."""

    delta: np.ndarray
    X: np.ndarray
    qb: np.ndarray
    motion: np.ndarray
    defense: np.ndarray
    covariate_names: tuple[str, ...]
    qb_ids: tuple[str, ...]
    motion_ids: tuple[str, ...]
    defense_ids: tuple[str, ...]
    keys: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=float)
        n = len(self.delta)
        self.X = np.asarray(self.X, dtype=float).reshape(n, len(self.covariate_names))
        self.qb = np.asarray(self.qb, dtype=np.intp)
        self.motion = np.asarray(self.motion, dtype=np.intp)
        self.defense = np.asarray(self.defense, dtype=np.intp)
        if np.any(self.delta <= 0):
            raise BuildError("snap timing must be positive")
        for idx, ids, what in (
            (self.qb, self.qb_ids, "qb"),
            (self.motion, self.motion_ids, "motion"),
            (self.defense, self.defense_ids, "defense"),
        ):
            if len(idx) != n:
                raise BuildError(f"{what} index length {len(idx)} != {n} rows")
            if n and (idx.min() < 0 or idx.max() >= len(ids)):
                raise BuildError(f"{what} index out of range")
        if not self.keys:
            self.keys = [("", str(i)) for i in range(n)]
        self._log_delta = np.log(self.delta)
        self._log_delta_sum = float(self._log_delta.sum())
        self._qb_counts = np.bincount(self.qb, minlength=self.n_qb).astype(float)

    @property
    def n_rows(self) -> int:
        return len(self.delta)

    @property
    def n_covariates(self) -> int:
        return len(self.covariate_names)

    @property
    def n_qb(self) -> int:
        return len(self.qb_ids)

    @property
    def n_motion(self) -> int:
        return len(self.motion_ids)

    @property
    def n_defense(self) -> int:
        return len(self.defense_ids)

    def row(self, i: int) -> DesignRow:
        return DesignRow(float(self.delta[i]), self.X[i].copy(), int(self.qb[i]), int(self.motion[i]), int(self.defense[i]))

    def rows(self) -> Iterable[DesignRow]:
        return (self.row(i) for i in range(self.n_rows))

    def group_counts(self) -> dict[str, dict[str, int]]:
        """Plays per group member, keyed by identifier."""
        out = {}
        for name, idx, ids in (
            ("qb", self.qb, self.qb_ids),
            ("motion", self.motion, self.motion_ids),
            ("defense", self.defense, self.defense_ids),
        ):
            counts = np.bincount(idx, minlength=len(ids))
            out[name] = {ids[k]: int(counts[k]) for k in range(len(ids))}
        return out

    def subset(self, rows) -> "Design":
        """Design restricted to the given row indices; group maps are kept."""
        rows = np.asarray(rows, dtype=np.intp)
        return Design(
            self.delta[rows], self.X[rows], self.qb[rows], self.motion[rows], self.defense[rows],
            self.covariate_names, self.qb_ids, self.motion_ids, self.defense_ids,
            [self.keys[i] for i in rows],
        )


def _dense_index(values: Sequence[str]) -> tuple[np.ndarray, tuple[str, ...]]:
    ids = tuple(sorted(set(values)))
    lookup = {v: k for k, v in enumerate(ids)}
    return np.array([lookup[v] for v in values], dtype=np.intp), ids


def _play_clock_at_motion(play: PlayRecord, delta: int) -> float | None:
    if play.play_clock_at_motion is not None:
        return float(play.play_clock_at_motion)
    if play.play_clock_at_snap is not None:
        # the clock counts down, so it read delta/10 seconds more at motion start
        return float(play.play_clock_at_snap) + delta / 10.0
    return None


def covariate_row(
    down: int, play_clock: float, timeouts: int, position: str, n_motion: int, cluster: int, n_clusters: int
) -> np.ndarray:
    """Encode one play's covariates; ``cluster`` is 1-based."""
    if down not in (1, 2, 3, 4):
        raise BuildError(f"down {down} not in 1..4")
    if timeouts not in (0, 1, 2, 3):
        raise BuildError(f"timeouts {timeouts} not in 0..3")
    if position not in ("RB", "TE", "WR"):
        raise BuildError(f"motion position {position!r} not in RB/TE/WR")
    if not 1 <= cluster <= n_clusters:
        raise BuildError(f"cluster label {cluster} not in 1..{n_clusters}")
    row = np.zeros(10 + n_clusters - 1)
    if down > 1:
        row[down - 2] = 1.0
    row[3] = play_clock
    if timeouts > 0:
        row[3 + timeouts] = 1.0
    if position == "TE":
        row[7] = 1.0
    elif position == "WR":
        row[8] = 1.0
    row[9] = n_motion
    if cluster > 1:
        row[10 + cluster - 2] = 1.0
    return row


def build_design(
    plays: Iterable[PlayRecord],
    snap_timings: Mapping,
    cluster_assignments: Mapping,
    n_clusters: int = DEFAULT_N_CLUSTERS,
    center_play_clock: bool = False,
) -> Design:
    """One design row per play.

    ``snap_timings`` maps play keys to :class:`SnapTiming` (or any object
    with ``delta``); ``cluster_assignments`` maps play keys to a 0-based
    hard label or a :class:`ClusterAssignment`.

    Raises
    ------
    BuildError
        A play lacks a timing, a cluster label inside ``0..n_clusters-1``,
        or a required covariate.
    """
    rows, deltas, qbs, movers, defenses, keys = [], [], [], [], [], []
    for play in plays:
        key = play.key
        if key not in snap_timings:
            raise BuildError(f"{key[0]}/{key[1]}: no snap timing")
        if key not in cluster_assignments:
            raise BuildError(f"{key[0]}/{key[1]}: no cluster label")
        label = cluster_assignments[key]
        label = getattr(label, "hard_label", label)
        delta = snap_timings[key].delta
        clock = _play_clock_at_motion(play, delta)
        missing = [
            name
            for name, v in (
                ("down", play.down), ("play clock", clock), ("timeouts", play.timeouts_remaining),
                ("motion position", play.motion_position), ("qb", play.qb_id),
                ("motion player", play.motion_player_id), ("defense", play.defense_team),
            )
            if v is None
        ]
        if missing:
            raise BuildError(f"{key[0]}/{key[1]}: missing {', '.join(missing)}")
        try:
            row = covariate_row(
                play.down, clock, play.timeouts_remaining, play.motion_position,
                play.n_motion_since_lineset, int(label) + 1, n_clusters,
            )
        except BuildError as exc:
            raise BuildError(f"{key[0]}/{key[1]}: {exc}") from None
        rows.append(row)
        deltas.append(float(delta))
        qbs.append(play.qb_id)
        movers.append(play.motion_player_id)
        defenses.append(play.defense_team)
        keys.append(key)

    names = covariate_names(n_clusters)
    X = np.array(rows).reshape(len(rows), len(names))
    if center_play_clock and len(rows):
        X[:, 3] -= X[:, 3].mean()
    qb, qb_ids = _dense_index(qbs)
    motion, motion_ids = _dense_index(movers)
    defense, defense_ids = _dense_index(defenses)
    log.info("design: %d rows, %d QBs, %d motion players, %d defenses", len(rows), len(qb_ids), len(motion_ids), len(defense_ids))
    return Design(np.array(deltas), X, qb, motion, defense, names, qb_ids, motion_ids, defense_ids, keys)


# ---------------------------------------------------------------- density


def gamma_logpdf(x, mu, alpha):
    """Gamma log density with mean ``mu`` and shape ``alpha`` (rate alpha/mu).

    Raises
    ------
    DomainError
        Any argument is not strictly positive.
    """
    x, mu, alpha = (np.asarray(v, dtype=float) for v in (x, mu, alpha))
    if np.any(~(x > 0)) or np.any(~(mu > 0)) or np.any(~(alpha > 0)):
        raise DomainError("gamma_logpdf needs x, mu, alpha > 0")
    out = alpha * np.log(alpha / mu) + (alpha - 1.0) * np.log(x) - alpha / mu * x - lgamma(alpha)
    return float(out) if out.ndim == 0 else out


def half_t_logpdf(sigma: float, scale: float, dof: float) -> float:
    """Log density of |T| for T ~ scale * Student-t(dof), at ``sigma`` > 0."""
    z2 = (sigma / scale) ** 2
    return (
        math.log(2.0)
        + math.lgamma((dof + 1) / 2)
        - math.lgamma(dof / 2)
        - 0.5 * math.log(dof * math.pi)
        - math.log(scale)
        - (dof + 1) / 2 * math.log1p(z2 / dof)
    )


def normal_logpdf(x, sd: float = 1.0) -> float:
    x = np.asarray(x, dtype=float)
    return float(-0.5 * np.sum((x / sd) ** 2) - x.size * (math.log(sd) + 0.5 * _LOG_2PI))


@dataclass(frozen=True)
class ParameterLayout:
    """Slices of the unconstrained parameter vector.

    Order: gamma0, beta, log_sigma_q, log_sigma_m, log_sigma_d, psi0,
    log_tau_q, z_q, z_m, z_d, w_q.
    """

    n_covariates: int
    n_qb: int
    n_motion: int
    n_defense: int
    covariate_names: tuple[str, ...] = ()

    @classmethod
    def for_design(cls, design: Design) -> "ParameterLayout":
        return cls(design.n_covariates, design.n_qb, design.n_motion, design.n_defense, design.covariate_names)

    @property
    def dim(self) -> int:
        return 6 + self.n_covariates + 2 * self.n_qb + self.n_motion + self.n_defense

    def _offsets(self):
        p = self.n_covariates
        o = {"gamma0": 0, "beta": 1, "log_sigma_q": 1 + p, "log_sigma_m": 2 + p, "log_sigma_d": 3 + p,
             "psi0": 4 + p, "log_tau_q": 5 + p}
        o["z_q"] = 6 + p
        o["z_m"] = o["z_q"] + self.n_qb
        o["z_d"] = o["z_m"] + self.n_motion
        o["w_q"] = o["z_d"] + self.n_defense
        return o

    def slices(self) -> dict[str, slice]:
        o = self._offsets()
        sizes = {"gamma0": 1, "beta": self.n_covariates, "log_sigma_q": 1, "log_sigma_m": 1, "log_sigma_d": 1,
                 "psi0": 1, "log_tau_q": 1, "z_q": self.n_qb, "z_m": self.n_motion, "z_d": self.n_defense,
                 "w_q": self.n_qb}
        return {k: slice(o[k], o[k] + sizes[k]) for k in sizes}

    def names(self) -> list[str]:
        cov = self.covariate_names or tuple(str(j) for j in range(self.n_covariates))
        out = ["gamma0"] + [f"beta[{c}]" for c in cov]
        out += ["log_sigma_q", "log_sigma_m", "log_sigma_d", "psi0", "log_tau_q"]
        out += [f"z_q[{k}]" for k in range(self.n_qb)]
        out += [f"z_m[{k}]" for k in range(self.n_motion)]
        out += [f"z_d[{k}]" for k in range(self.n_defense)]
        out += [f"w_q[{k}]" for k in range(self.n_qb)]
        return out

    def unpack(self, theta: np.ndarray) -> dict[str, np.ndarray]:
        """Split a vector (or a stack of vectors along the last axis) by block."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.dim:
            raise ValueError(f"parameter vector has length {theta.shape[-1]}, expected {self.dim}")
        out = {}
        for k, s in self.slices().items():
            v = theta[..., s]
            out[k] = v[..., 0] if s.stop - s.start == 1 and k not in ("beta", "z_q", "z_m", "z_d", "w_q") else v
        return out

    def pack(self, **blocks) -> np.ndarray:
        theta = np.zeros(self.dim)
        for k, s in self.slices().items():
            if k in blocks:
                theta[s] = blocks[k]
        return theta

    def realize(self, theta: np.ndarray) -> dict[str, np.ndarray]:
        """Constrained parameters and realized effects from unconstrained draws."""
        p = self.unpack(theta)
        sigma_q, sigma_m, sigma_d, tau_q = (np.exp(p[k]) for k in ("log_sigma_q", "log_sigma_m", "log_sigma_d", "log_tau_q"))
        return {
            "gamma0": p["gamma0"],
            "beta": p["beta"],
            "psi0": p["psi0"],
            "sigma_q": sigma_q,
            "sigma_m": sigma_m,
            "sigma_d": sigma_d,
            "tau_q": tau_q,
            "b_q": np.asarray(sigma_q)[..., None] * p["z_q"],
            "b_m": np.asarray(sigma_m)[..., None] * p["z_m"],
            "b_d": np.asarray(sigma_d)[..., None] * p["z_d"],
            "u_q": np.asarray(tau_q)[..., None] * p["w_q"],
        }


_FAST = {"contract", "arcp", "reassoc", "nsz", "afn"}


@njit(cache=True, fastmath=_FAST, error_model="numpy")
def _log_posterior_kernel(theta, delta, log_delta, X, qb, motion, defense, qb_counts,
                          n_motion, n_defense, fixed_sd, scale, dof, const):
    """Log posterior and gradient in one pass over the parameter layout.

    With ``r = delta / mu`` each row contributes
    ``alpha (log alpha + log delta - eta - r) - log delta - lgamma(alpha)``;
    everything multiplied by alpha is summed per QB in ``S`` so lgamma and
    digamma run once per QB rather than once per row.
    """
    n, p = X.shape
    n_qb = qb_counts.shape[0]
    o_sd = 1 + p
    o_psi = 4 + p
    o_tau = 5 + p
    o_zq = 6 + p
    o_zm = o_zq + n_qb
    o_zd = o_zm + n_motion
    o_wq = o_zd + n_defense
    grad = np.zeros_like(theta)

    sig = np.empty(4)
    for k in range(3):
        sig[k] = math.exp(theta[o_sd + k])
    sig[3] = math.exp(theta[o_tau])
    log_sd = np.array([theta[o_sd], theta[o_sd + 1], theta[o_sd + 2], theta[o_tau]])

    # Normal(0, fixed_sd) on gamma0, beta, psi0
    fixed_var = fixed_sd * fixed_sd
    lp = const
    for j in range(o_sd):
        lp -= 0.5 * theta[j] * theta[j] / fixed_var
        grad[j] = -theta[j] / fixed_var
    lp -= 0.5 * theta[o_psi] * theta[o_psi] / fixed_var
    grad[o_psi] = -theta[o_psi] / fixed_var
    # standard normal on the standardized effects
    for j in range(o_zq, theta.shape[0]):
        lp -= 0.5 * theta[j] * theta[j]
        grad[j] = -theta[j]
    # half-t on each SD with the log-scale Jacobian
    g_log_sd = np.empty(4)
    scale2 = scale * scale
    for k in range(4):
        s2 = sig[k] * sig[k]
        lp += -(dof + 1.0) / 2.0 * math.log1p(s2 / (dof * scale2)) + log_sd[k]
        g_log_sd[k] = 1.0 - (dof + 1.0) * s2 / (dof * scale2 + s2)

    if n > 0:
        gamma0 = theta[0]
        S = np.zeros(n_qb)
        G_q = np.zeros(n_qb)
        G_m = np.zeros(n_motion)
        G_d = np.zeros(n_defense)
        alpha = np.empty(n_qb)
        log_alpha = np.empty(n_qb)
        for q in range(n_qb):
            log_alpha[q] = theta[o_psi] + sig[3] * theta[o_wq + q]
            alpha[q] = math.exp(log_alpha[q])
            if not (alpha[q] > 0.0 and alpha[q] < np.inf):
                grad[:] = np.nan
                return -np.inf, grad
        for i in range(n):
            q = qb[i]
            m = motion[i]
            dd = defense[i]
            eta = gamma0 + sig[0] * theta[o_zq + q] + sig[1] * theta[o_zm + m] + sig[2] * theta[o_zd + dd]
            for j in range(p):
                eta += X[i, j] * theta[1 + j]
            r = delta[i] * math.exp(-eta)
            S[q] += log_delta[i] - eta - r
            lp -= log_delta[i]
            g = alpha[q] * (r - 1.0)
            grad[0] += g
            for j in range(p):
                grad[1 + j] += g * X[i, j]
            G_q[q] += g
            G_m[m] += g
            G_d[dd] += g
        for q in range(n_qb):
            a = alpha[q]
            lp += qb_counts[q] * (a * log_alpha[q] - lgamma_scalar(a)) + a * S[q]
            g_la = a * (qb_counts[q] * (log_alpha[q] + 1.0 - digamma_scalar(a)) + S[q])
            grad[o_psi] += g_la
            grad[o_wq + q] += sig[3] * g_la
            g_log_sd[3] += sig[3] * theta[o_wq + q] * g_la
            grad[o_zq + q] += sig[0] * G_q[q]
            g_log_sd[0] += sig[0] * theta[o_zq + q] * G_q[q]
        for m in range(n_motion):
            grad[o_zm + m] += sig[1] * G_m[m]
            g_log_sd[1] += sig[1] * theta[o_zm + m] * G_m[m]
        for dd in range(n_defense):
            grad[o_zd + dd] += sig[2] * G_d[dd]
            g_log_sd[2] += sig[2] * theta[o_zd + dd] * G_d[dd]

    for k in range(3):
        grad[o_sd + k] = g_log_sd[k]
    grad[o_tau] = g_log_sd[3]
    return lp, grad


class ModelPosterior:
    """Log posterior and gradient of the snap-timing model on one design.

    The gradient call also computes the log density and caches it, so a
    following ``log_density`` call at the same point costs nothing.
    """

    def __init__(self, design: Design, config: ModelConfig | None = None):
        self.design = design
        self.config = config or ModelConfig()
        self.layout = ParameterLayout.for_design(design)
        self._slices = self.layout.slices()
        self._cache_theta: np.ndarray | None = None
        self._cache_value = (-np.inf, None)
        cfg = self.config
        half_t_const = (
            math.log(2.0) + math.lgamma((cfg.dof + 1) / 2) - math.lgamma(cfg.dof / 2)
            - 0.5 * math.log(cfg.dof * math.pi) - math.log(cfg.prior_scale_sd)
        )
        n_fixed = 2 + design.n_covariates
        n_std = self.layout.dim - 6 - design.n_covariates
        # normalizing constants of every prior term
        self._const = (
            4 * half_t_const
            - n_fixed * (math.log(cfg.prior_sd_fixed) + 0.5 * _LOG_2PI)
            - 0.5 * n_std * _LOG_2PI
        )

    @property
    def dim(self) -> int:
        return self.layout.dim

    def _evaluate(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        d, cfg = self.design, self.config
        return _log_posterior_kernel(
            theta, d.delta, d._log_delta, d.X, d.qb, d.motion, d.defense, d._qb_counts,
            d.n_motion, d.n_defense, cfg.prior_sd_fixed, cfg.prior_scale_sd, cfg.dof, self._const,
        )

    def _cached(self, theta) -> tuple[float, np.ndarray | None]:
        theta = np.asarray(theta, dtype=float)
        if self._cache_theta is not None and np.array_equal(theta, self._cache_theta):
            return self._cache_value
        try:
            lp, grad = self._evaluate(theta)
        except (ArithmeticError, DomainError):
            lp, grad = -np.inf, np.full_like(theta, np.nan)
        if not np.isfinite(lp):
            lp = -np.inf
        self._cache_theta = theta.copy()
        self._cache_value = (lp, grad)
        return lp, grad

    def log_density(self, theta) -> float:
        return self._cached(theta)[0]

    def gradient(self, theta) -> np.ndarray:
        return self._cached(theta)[1].copy()

    def default_init(self) -> np.ndarray:
        """Moment-matched start: intercepts from the response, SDs at 0.1."""
        d = self.design
        blocks = {"log_sigma_q": math.log(0.1), "log_sigma_m": math.log(0.1),
                  "log_sigma_d": math.log(0.1), "log_tau_q": math.log(0.1)}
        if d.n_rows >= 2:
            m, v = float(d.delta.mean()), float(d.delta.var())
            blocks["gamma0"] = math.log(m)
            blocks["psi0"] = math.log(m * m / v) if v > 0 else 0.0
        return self.layout.pack(**blocks)


def log_posterior(params, design: Design, config: ModelConfig | None = None) -> float:
    """Joint log posterior in the unconstrained parameterization; -inf if not finite."""
    return ModelPosterior(design, config).log_density(params)


def log_posterior_gradient(params, design: Design, config: ModelConfig | None = None) -> np.ndarray:
    """Analytic gradient of :func:`log_posterior`."""
    return ModelPosterior(design, config).gradient(params)


@dataclass
class FitResult:
    design: Design
    layout: ParameterLayout
    draws: PosteriorDraws
    diagnostics: Diagnostics

    def realized(self) -> dict[str, np.ndarray]:
        """Constrained parameters and effects, chains pooled."""
        return self.layout.realize(self.draws.pooled())


def fit(design: Design, sampler_config: SamplerConfig | None = None, config: ModelConfig | None = None) -> FitResult:
    """Sample the posterior of the snap-timing model and run diagnostics."""
    sampler_config = sampler_config or SamplerConfig.desk()
    posterior = ModelPosterior(design, config)
    draws = hmc_sample(
        posterior.log_density, posterior.gradient, posterior.dim, sampler_config,
        parameter_names=posterior.layout.names(), init=posterior.default_init(),
    )
    diag = diagnose(draws.chains, draws.parameter_names)
    if diag.max_rhat > 1.05:
        log.warning("max split R-hat %.3f exceeds 1.05", diag.max_rhat)
    return FitResult(design, posterior.layout, draws, diag)


# ---------------------------------------------------------------- export


def write_design_csv(design: Design, stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["game_id", "play_id", "delta", *design.covariate_names, "qb_index", "motion_index", "defense_index"])
    for i in range(design.n_rows):
        writer.writerow([
            *design.keys[i], repr(float(design.delta[i])), *(repr(float(v)) for v in design.X[i]),
            int(design.qb[i]), int(design.motion[i]), int(design.defense[i]),
        ])


def design_group_maps(design: Design) -> dict:
    """Sidecar mapping from dense group indices to identifiers, with counts."""
    counts = design.group_counts()
    return {
        "qb": list(design.qb_ids),
        "motion": list(design.motion_ids),
        "defense": list(design.defense_ids),
        "counts": counts,
        "covariates": list(design.covariate_names),
    }


def write_design_maps(design: Design, stream: TextIO, provenance: dict | None = None) -> None:
    d = design_group_maps(design)
    if provenance is not None:
        d["provenance"] = provenance
    json.dump(d, stream, indent=2)


def read_design(csv_stream: TextIO, maps: dict) -> Design:
    reader = csv.DictReader(line for line in csv_stream if not line.startswith("#"))
    names = tuple(maps["covariates"])
    rows = list(reader)
    return Design(
        delta=np.array([float(r["delta"]) for r in rows]),
        X=np.array([[float(r[c]) for c in names] for r in rows]).reshape(len(rows), len(names)),
        qb=np.array([int(r["qb_index"]) for r in rows], dtype=np.intp),
        motion=np.array([int(r["motion_index"]) for r in rows], dtype=np.intp),
        defense=np.array([int(r["defense_index"]) for r in rows], dtype=np.intp),
        covariate_names=names,
        qb_ids=tuple(maps["qb"]),
        motion_ids=tuple(maps["motion"]),
        defense_ids=tuple(maps["defense"]),
        keys=[(r["game_id"], r["play_id"]) for r in rows],
    )
