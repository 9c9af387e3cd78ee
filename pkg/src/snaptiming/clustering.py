"""Motion-type features and Gaussian mixture clustering.

Four displacements of the motion player relative to the center describe
each motion: lateral and longitudinal offsets at the snap, the lateral
offset at motion start, and the lateral offset when the player crosses the
line of scrimmage (or, failing that, at the quarterback's first post-snap
event or 30 frames after the snap, whichever comes first).

Mixtures are fit by EM under four covariance families and compared by BIC
(larger is better).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .detection import SnapTiming
from .errors import FeatureError, SelectionError
from .ingest import PlayRecord

log = logging.getLogger(__name__)

FEATURE_NAMES = ("b_sideline", "b_endzone", "m_sideline", "l_sideline")
FALLBACK_FRAMES = 30
QB_EVENTS = frozenset({
    "pass_forward", "pass_shovel", "qb_sack", "qb_strip_sack", "qb_spike",
    "qb_slide", "run", "handoff", "fumble", "lateral",
})

FAMILIES = ("EII", "VII", "VVI", "VVV")
FAMILY_LABELS = {
    "EII": "spherical-equal",
    "VII": "spherical-varying",
    "VVI": "diagonal-varying",
    "VVV": "full-varying",
}
COV_FLOOR = 1e-6
EM_TOL = 1e-8
EM_MAX_ITER = 500
N_RESTARTS = 5
_LOG_2PI = math.log(2.0 * math.pi)


# -------------------------------------------------------------- features


@dataclass(frozen=True)
class MotionFeatures:
    game_id: str
    play_id: str
    b_sideline: float
    b_endzone: float
    m_sideline: float
    l_sideline: float
    mirrored: bool = False

    @property
    def key(self) -> tuple[str, str]:
        return (self.game_id, self.play_id)

    def as_array(self) -> np.ndarray:
        return np.array([self.b_sideline, self.b_endzone, self.m_sideline, self.l_sideline])


def _relative(play: PlayRecord, frame: int) -> tuple[float, float]:
    mp, ct = play.motion_track, play.center_track
    i, j = mp.index_of(frame), ct.index_of(frame)
    if i is None or j is None:
        raise FeatureError(f"{play.game_id}/{play.play_id}: tracks do not cover frame {frame}")
    return float(mp.x[i] - ct.x[j]), float(mp.y[i] - ct.y[j])


def l_sideline_frame(play: PlayRecord, t_snap: int) -> int:
    """Frame at which the line-of-scrimmage lateral displacement is read."""
    mp, ct = play.motion_track, play.center_track
    los = float(ct.at(t_snap).x)
    after = mp.frame_id > t_snap
    crossed = np.flatnonzero(after & (mp.x > los))
    if len(crossed):
        return int(mp.frame_id[crossed[0]])
    fallback = t_snap + FALLBACK_FRAMES
    qb = play.qb_track
    if qb is not None:
        for f, e in zip(qb.frame_id, qb.event):
            if f > t_snap and e in QB_EVENTS:
                fallback = min(fallback, int(f))
                break
    last = int(min(mp.frame_id[-1], ct.frame_id[-1]))
    return min(fallback, last)


def extract_motion_features(play: PlayRecord, timing: SnapTiming, mirror: bool = True) -> MotionFeatures:
    """Displacements of the motion player from the center at key moments.

    With ``mirror`` set, the three lateral features are negated when the
    motion-start lateral displacement is negative, so mirror-image motions
    on either side of the formation share one cluster.
    """
    if play.center_track is None:
        raise FeatureError(f"{play.game_id}/{play.play_id}: no center track")
    if play.motion_track is None:
        raise FeatureError(f"{play.game_id}/{play.play_id}: no motion player track")
    b_end, b_side = _relative(play, timing.t_snap)
    _, m_side = _relative(play, timing.t_motion)
    _, l_side = _relative(play, l_sideline_frame(play, timing.t_snap))
    flip = mirror and m_side < 0
    if flip:
        b_side, m_side, l_side = -b_side, -m_side, -l_side
    return MotionFeatures(play.game_id, play.play_id, b_side, b_end, m_side, l_side, flip)


def extract_all(plays: Iterable[PlayRecord], timings: dict, mirror: bool = True, report=None) -> list[MotionFeatures]:
    out = []
    for play in plays:
        timing = timings.get(play.key)
        if timing is None:
            continue
        try:
            out.append(extract_motion_features(play, timing, mirror))
        except (FeatureError, KeyError) as exc:
            if report is not None:
                report.reject(play.key, f"features: {exc}")
    return out


def feature_matrix(features: Sequence[MotionFeatures]) -> np.ndarray:
    if not features:
        return np.empty((0, len(FEATURE_NAMES)))
    return np.vstack([f.as_array() for f in features])


def write_features(features: Iterable[MotionFeatures], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("game_id", "play_id") + FEATURE_NAMES)
    for f in features:
        writer.writerow([f.game_id, f.play_id, *(repr(float(v)) for v in f.as_array())])


def read_features(stream: TextIO) -> list[MotionFeatures]:
    rows = csv.DictReader(line for line in stream if not line.startswith("#"))
    return [MotionFeatures(r["game_id"], r["play_id"], *(float(r[n]) for n in FEATURE_NAMES)) for r in rows]


# ----------------------------------------------------------- mixture model


@dataclass
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    family: str
    loglik: float
    n_obs: int
    seed: int | None = None
    n_iter: int = 0
    converged: bool = False
    degenerate: bool = False
    loglik_trace: list = field(default_factory=list, repr=False)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    @property
    def n_params(self) -> int:
        return n_parameters(self.family, self.n_components, self.n_features)

    @property
    def bic(self) -> float:
        return bic_score(self, self.n_obs)

    def log_component_densities(self, X: np.ndarray) -> np.ndarray:
        """``log(w_k) + log N(x | mean_k, cov_k)`` with shape (n, G)."""
        return _weighted_log_densities(np.asarray(X, dtype=float), self.weights, self.means, self.covariances)

    def score_samples(self, X: np.ndarray) -> np.ndarray:
        """Log mixture density at each row of ``X``."""
        return _logsumexp(self.log_component_densities(X), axis=1)

    def responsibilities(self, X: np.ndarray) -> np.ndarray:
        lp = self.log_component_densities(X)
        resp = np.exp(lp - _logsumexp(lp, axis=1)[:, None])
        return resp / resp.sum(axis=1, keepdims=True)

    def permuted(self, order: Sequence[int]) -> "GmmModel":
        order = np.asarray(order)
        return GmmModel(
            weights=self.weights[order], means=self.means[order], covariances=self.covariances[order],
            family=self.family, loglik=self.loglik, n_obs=self.n_obs, seed=self.seed, n_iter=self.n_iter,
            converged=self.converged, degenerate=self.degenerate, loglik_trace=list(self.loglik_trace),
        )

    def to_dict(self) -> dict:
        return {
            "n_components": self.n_components,
            "family": self.family,
            "family_label": FAMILY_LABELS[self.family],
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": [c.ravel().tolist() for c in self.covariances],
            "loglik": self.loglik,
            "bic": self.bic,
            "n_params": self.n_params,
            "n_obs": self.n_obs,
            "seed": self.seed,
            "converged": self.converged,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GmmModel":
        means = np.asarray(d["means"], dtype=float)
        p = means.shape[1]
        return cls(
            weights=np.asarray(d["weights"], dtype=float),
            means=means,
            covariances=np.asarray(d["covariances"], dtype=float).reshape(-1, p, p),
            family=d["family"],
            loglik=float(d["loglik"]),
            n_obs=int(d["n_obs"]),
            seed=d.get("seed"),
            converged=bool(d.get("converged", False)),
            degenerate=bool(d.get("degenerate", False)),
        )


@dataclass(frozen=True)
class ClusterAssignment:
    game_id: str
    play_id: str
    responsibilities: np.ndarray

    @property
    def key(self) -> tuple[str, str]:
        return (self.game_id, self.play_id)

    @property
    def hard_label(self) -> int:
        # np.argmax returns the lowest index among ties
        return int(np.argmax(self.responsibilities))


def n_parameters(family: str, G: int, d: int) -> int:
    """Free parameters of a G-component mixture in dimension d."""
    cov = {"EII": 1, "VII": G, "VVI": G * d, "VVV": G * d * (d + 1) // 2}
    if family not in cov:
        raise ValueError(f"unknown family {family!r}")
    return (G - 1) + G * d + cov[family]


def bic_score(model: GmmModel, n: int) -> float:
    """``2 loglik - k log n``; larger is better."""
    k = model.n_params
    if k == 0:
        return 2.0 * model.loglik
    return 2.0 * model.loglik - k * math.log(n)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def _weighted_log_densities(X, weights, means, covs) -> np.ndarray:
    d = X.shape[1]
    chol = np.linalg.cholesky(covs)
    inv_chol = np.linalg.inv(chol)
    diff = X[None, :, :] - means[:, None, :]
    z = diff @ np.swapaxes(inv_chol, 1, 2)
    maha = (z * z).sum(axis=2).T
    logdet = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
    return np.log(weights)[None, :] - 0.5 * (d * _LOG_2PI + logdet[None, :] + maha)


def _floor_eigen(S: np.ndarray, floor: float) -> np.ndarray:
    """Clip eigenvalues of a batch of symmetric matrices at ``floor``."""
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    vals, vecs = np.linalg.eigh(S)
    if vals.min() >= floor:
        return S
    vals = np.maximum(vals, floor)
    return np.einsum("gij,gj,gkj->gik", vecs, vals, vecs)


def _m_step(X: np.ndarray, resp: np.ndarray, family: str, floor: float):
    """Constrained maximizer of the expected complete-data log-likelihood.

    Covariance eigenvalues are clipped at ``floor``; for Gaussian scatter
    this clipping is the exact maximizer under the eigenvalue constraint,
    so EM stays monotone.
    """
    n, d = X.shape
    nk = resp.sum(axis=0)
    weights = nk / n
    means = (resp.T @ X) / nk[:, None]
    G = len(nk)
    diff = X[None, :, :] - means[:, None, :]
    weighted = resp.T[:, :, None] * diff
    eye = np.eye(d)
    if family == "VVV":
        S = np.swapaxes(weighted, 1, 2) @ diff / nk[:, None, None]
        covs = _floor_eigen(S, floor)
    elif family == "VVI":
        var = (weighted * diff).sum(axis=1) / nk[:, None]
        covs = np.maximum(var, floor)[:, :, None] * eye[None]
    elif family == "VII":
        lam = (weighted * diff).sum(axis=(1, 2)) / (d * nk)
        covs = np.maximum(lam, floor)[:, None, None] * eye[None]
    elif family == "EII":
        lam = max(float((weighted * diff).sum()) / (d * n), floor)
        covs = np.broadcast_to(lam * eye, (G, d, d)).copy()
    else:
        raise ValueError(f"unknown family {family!r}")
    return weights, means, covs


def kmeans_plus_plus(X: np.ndarray, G: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: centers chosen with probability proportional to D^2."""
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, G):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _initial_responsibilities(X, G, rng, lloyd_iter=10) -> np.ndarray:
    centers = kmeans_plus_plus(X, G, rng)
    for _ in range(lloyd_iter):
        dist = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
        labels = dist.argmin(axis=1)
        new = centers.copy()
        for k in range(G):
            members = X[labels == k]
            if len(members):
                new[k] = members.mean(axis=0)
        if np.allclose(new, centers):
            break
        centers = new
    dist = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
    labels = dist.argmin(axis=1)
    resp = np.zeros((len(X), G))
    resp[np.arange(len(X)), labels] = 1.0
    return resp


def _em_single(X, G, family, rng, tol, max_iter, floor):
    n = len(X)
    resp = _initial_responsibilities(X, G, rng)
    if (resp.sum(axis=0) < 1.0).any():
        return None
    weights, means, covs = _m_step(X, resp, family, floor)
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        lp = _weighted_log_densities(X, weights, means, covs)
        row = _logsumexp(lp, axis=1)
        ll = float(np.sum(row))
        trace.append(ll)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol * abs(trace[-1]):
            converged = True
            break
        resp = np.exp(lp - row[:, None])
        if (resp.sum(axis=0) < 1.0).any():
            # a component has collapsed below one effective observation
            return GmmModel(weights, means, covs, family, ll, n, n_iter=it, degenerate=True, loglik_trace=trace)
        weights, means, covs = _m_step(X, resp, family, floor)
    if not converged:
        trace.append(float(np.sum(_logsumexp(_weighted_log_densities(X, weights, means, covs), axis=1))))
    return GmmModel(weights, means, covs, family, trace[-1], n, n_iter=it, converged=converged, loglik_trace=trace)


def em_fit(
    features: np.ndarray,
    G: int,
    family: str = "VVV",
    seed: int = 0,
    n_restarts: int = N_RESTARTS,
    tol: float = EM_TOL,
    max_iter: int = EM_MAX_ITER,
    floor: float = COV_FLOOR,
) -> GmmModel:
    """Fit a G-component mixture by EM, keeping the best of several starts.

    Rows are sorted lexicographically before fitting, so the result does
    not depend on input row order. A start is degenerate when some
    component's weight drops below 1/n; if every start is degenerate the
    best one is returned with ``degenerate=True``.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D array")
    n = len(X)
    if G < 1 or n < G:
        raise ValueError(f"need 1 <= G <= n, got G={G}, n={n}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    Xs = X[np.lexsort(X.T[::-1])]

    best: GmmModel | None = None
    best_degenerate: GmmModel | None = None
    streams = np.random.SeedSequence(seed).spawn(max(n_restarts, 1))
    for ss in streams:
        model = _em_single(Xs, G, family, np.random.default_rng(ss), tol, max_iter, floor)
        if model is None:
            continue
        model.seed = seed
        if model.degenerate:
            if best_degenerate is None or model.loglik > best_degenerate.loglik:
                best_degenerate = model
            continue
        if best is None or model.loglik > best.loglik:
            best = model
    if best is None:
        if best_degenerate is None:
            raise SelectionError(f"EM could not initialize G={G} {family}")
        log.warning("all %d EM starts degenerate for G=%d %s", n_restarts, G, family)
        best = best_degenerate
    return best


@dataclass
class SelectionResult:
    model: GmmModel
    assignments: list[ClusterAssignment]
    bic_table: dict = field(default_factory=dict)

    @property
    def labels(self) -> np.ndarray:
        return np.array([a.hard_label for a in self.assignments], dtype=int)


def _relabel_by_size(model: GmmModel, X: np.ndarray) -> GmmModel:
    resp = model.responsibilities(X)
    counts = np.bincount(resp.argmax(axis=1), minlength=model.n_components)
    order = sorted(range(model.n_components), key=lambda k: (-counts[k], -model.weights[k], k))
    return model.permuted(order)


def select_model(
    features,
    G_range: Iterable[int] = range(1, 10),
    families: Iterable[str] = FAMILIES,
    seed: int = 0,
    keys: Sequence[tuple[str, str]] | None = None,
    n_restarts: int = N_RESTARTS,
) -> SelectionResult:
    """Fit every (G, family) pair and keep the BIC maximizer.

    ``features`` is either an (n, 4) array or a list of
    :class:`MotionFeatures`. Components of the winner are reordered by
    decreasing hard-assignment count.
    """
    if isinstance(features, (list, tuple)) and features and isinstance(features[0], MotionFeatures):
        keys = [f.key for f in features] if keys is None else keys
        X = feature_matrix(features)
    else:
        X = np.asarray(features, dtype=float)
    G_range = list(G_range)
    if not G_range:
        raise ValueError("G_range must be nonempty")
    keys = list(keys) if keys is not None else [("", str(i)) for i in range(len(X))]

    table = {}
    best = None
    for family in families:
        for G in G_range:
            if G > len(X):
                continue
            try:
                model = em_fit(X, G, family, seed=seed, n_restarts=n_restarts)
            except SelectionError:
                continue
            table[(family, G)] = None if model.degenerate else model.bic
            if model.degenerate:
                continue
            if best is None or model.bic > best.bic:
                best = model
    if best is None:
        raise SelectionError("every candidate mixture fit was degenerate")
    best = _relabel_by_size(best, X)
    resp = best.responsibilities(X)
    assignments = [ClusterAssignment(k[0], k[1], resp[i]) for i, k in enumerate(keys)]
    log.info("selected %s with G=%d (BIC %.2f)", best.family, best.n_components, best.bic)
    return SelectionResult(best, assignments, table)


def write_assignments(assignments: Sequence[ClusterAssignment], stream: TextIO) -> None:
    G = len(assignments[0].responsibilities) if assignments else 0
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["game_id", "play_id", "hard_label"] + [f"resp_{k + 1}" for k in range(G)])
    for a in assignments:
        writer.writerow([a.game_id, a.play_id, a.hard_label + 1, *(repr(float(r)) for r in a.responsibilities)])


def read_assignments(stream: TextIO) -> list[ClusterAssignment]:
    reader = csv.DictReader(line for line in stream if not line.startswith("#"))
    cols = [c for c in reader.fieldnames or [] if c.startswith("resp_")]
    return [ClusterAssignment(r["game_id"], r["play_id"], np.array([float(r[c]) for c in cols])) for r in reader]


def write_model_json(model: GmmModel, stream: TextIO, provenance: dict | None = None) -> None:
    d = model.to_dict()
    if provenance is not None:
        d["provenance"] = provenance
    json.dump(d, stream, indent=2)
