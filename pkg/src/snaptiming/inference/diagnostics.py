"""Convergence diagnostics for multi-chain MCMC output.

All functions take draws shaped ``(n_chains, n_draws)`` or
``(n_chains, n_draws, dim)`` and return one value per parameter.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import SnapTimingError

log = logging.getLogger(__name__)


def _as_3d(draws) -> np.ndarray:
    arr = np.asarray(draws, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise SnapTimingError("draws must be (chains, draws) or (chains, draws, dim)")
    if arr.shape[0] < 2 or arr.shape[1] < 4:
        raise SnapTimingError("diagnostics need at least 2 chains of 4 draws")
    return arr


def split_chains(draws) -> np.ndarray:
    """Split each chain in half, doubling the chain count.

    With an odd draw count the middle draw is dropped.
    """
    arr = _as_3d(draws)
    n = arr.shape[1] // 2
    first = arr[:, :n]
    second = arr[:, arr.shape[1] - n :]
    return np.concatenate([first, second], axis=0)


def _between_within(chains: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    n = chains.shape[1]
    means = chains.mean(axis=1)
    between = n * means.var(axis=0, ddof=1)
    within = chains.var(axis=1, ddof=1).mean(axis=0)
    return between, within, n


def split_rhat(draws) -> np.ndarray:
    """Split potential scale reduction factor per parameter.

    Parameters with zero within-chain variance get ``inf``.
    """
    chains = split_chains(draws)
    between, within, n = _between_within(chains)
    out = np.full(between.shape, np.inf)
    ok = within > 0
    var_plus = (n - 1) / n * within[ok] + between[ok] / n
    out[ok] = np.sqrt(var_plus / within[ok])
    if not ok.all():
        log.warning("split_rhat: %d parameter(s) have zero within-chain variance", (~ok).sum())
    return out


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance along axis 1 via FFT."""
    n = x.shape[1]
    centered = x - x.mean(axis=1, keepdims=True)
    size = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(centered, n=size, axis=1)
    acov = np.fft.irfft(spec * np.conj(spec), n=size, axis=1)[:, :n]
    return acov / n


def effective_sample_size(draws) -> np.ndarray:
    """Multi-chain ESS with Geyer's initial monotone sequence truncation.

    Computed on split chains. Degenerate (constant) parameters get ``nan``.
    The estimate is capped at the total number of draws.
    """
    chains = split_chains(draws)
    m, n, dim = chains.shape
    total = m * n
    between, within, _ = _between_within(chains)
    var_plus = (n - 1) / n * within + between / n
    out = np.full(dim, np.nan)
    for j in range(dim):
        if not within[j] > 0:
            continue
        acov = _autocovariance(chains[:, :, j])
        mean_acov = acov.mean(axis=0)
        rho = 1.0 - (within[j] - mean_acov) / var_plus[j]
        rho[0] = 1.0
        n_pairs = n // 2
        pairs = rho[: 2 * n_pairs].reshape(n_pairs, 2).sum(axis=1)
        positive = pairs > 0
        k = n_pairs if positive.all() else int(np.argmin(positive))
        pairs = np.minimum.accumulate(pairs[:k]) if k else pairs[:0]
        tau = -1.0 + 2.0 * pairs.sum()
        tau = max(tau, 1.0 / np.log10(total))
        out[j] = min(total / tau, float(total))
    if np.isnan(out).any():
        log.warning("effective_sample_size: %d degenerate parameter(s)", np.isnan(out).sum())
    return out


@dataclass
class Diagnostics:
    """Per-parameter convergence summary plus per-chain trace summaries."""

    names: list[str]
    rhat: np.ndarray
    ess: np.ndarray
    chain_means: np.ndarray
    chain_sds: np.ndarray
    degenerate: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.degenerate is None:
            self.degenerate = ~np.isfinite(self.rhat) | np.isnan(self.ess)

    @property
    def max_rhat(self) -> float:
        finite = self.rhat[np.isfinite(self.rhat)]
        if len(finite) < len(self.rhat):
            return float("inf")
        return float(finite.max()) if len(finite) else float("nan")

    @property
    def min_ess(self) -> float:
        return float(np.nanmin(self.ess)) if len(self.ess) else float("nan")

    def to_dict(self) -> dict:
        def clean(v):
            v = float(v)
            return v if np.isfinite(v) else None

        return {
            "parameters": {
                name: {
                    "rhat": clean(self.rhat[i]),
                    "ess": clean(self.ess[i]),
                    "chain_means": [clean(v) for v in self.chain_means[:, i]],
                    "chain_sds": [clean(v) for v in self.chain_sds[:, i]],
                    "degenerate": bool(self.degenerate[i]),
                }
                for i, name in enumerate(self.names)
            },
            "max_rhat": clean(self.max_rhat),
            "min_ess": clean(self.min_ess),
        }


def diagnose(draws, names: list[str] | None = None) -> Diagnostics:
    """Run split-R-hat and ESS over every parameter of a draw array."""
    arr = _as_3d(draws)
    names = names if names is not None else [f"theta[{i}]" for i in range(arr.shape[2])]
    if len(names) != arr.shape[2]:
        raise SnapTimingError("names length does not match draw dimension")
    return Diagnostics(
        names=list(names),
        rhat=split_rhat(arr),
        ess=effective_sample_size(arr),
        chain_means=arr.mean(axis=1),
        chain_sds=arr.std(axis=1, ddof=1),
    )
