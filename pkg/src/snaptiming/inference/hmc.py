"""Static-trajectory Hamiltonian Monte Carlo with warmup adaptation.

Warmup runs in three windows:

1. ``[0, W/2)``: dual-averaging step-size adaptation with a unit metric.
2. ``[W/2, 0.8 W)``: draws collected for the diagonal metric while the step
   size keeps adapting.
3. ``[0.8 W, W)``: metric fixed to the regularized draw variances, dual
   averaging restarted to retune the step size for the new metric.

After warmup the step size is frozen at the dual-averaging iterate average.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import SamplerError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 4
    n_iterations: int = 10_000
    n_warmup: int = 5_000
    leapfrog_steps: int = 32
    target_accept: float = 0.8
    seed: int = 0
    divergence_threshold: float = 1000.0
    step_jitter: float = 0.1
    init_radius: float = 2.0
    max_init_attempts: int = 100

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if not 0 <= self.n_warmup < self.n_iterations:
            raise ValueError("need 0 <= n_warmup < n_iterations")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.leapfrog_steps < 1:
            raise ValueError("leapfrog_steps must be >= 1")
        if not 0.0 <= self.step_jitter < 1.0:
            raise ValueError("step_jitter must lie in [0, 1)")

    @classmethod
    def desk(cls, **overrides) -> "SamplerConfig":
        """Laptop-scale defaults: 4 chains x 2,000 iterations, 1,000 warmup."""
        params = dict(n_chains=4, n_iterations=2_000, n_warmup=1_000)
        params.update(overrides)
        return cls(**params)

    @property
    def n_draws(self) -> int:
        return self.n_iterations - self.n_warmup


@dataclass
class PosteriorDraws:
    """Retained post-warmup draws, shape ``(n_chains, n_draws, dim)``."""

    chains: np.ndarray
    parameter_names: list[str]
    accept_rate: np.ndarray
    divergences: np.ndarray
    step_size: np.ndarray
    inv_metric: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        if self.chains.ndim != 3:
            raise ValueError("chains must be 3-dimensional")
        if len(self.parameter_names) != self.chains.shape[2]:
            raise ValueError("parameter_names length must equal draw dimension")
        if np.isnan(self.chains).any():
            raise SamplerError("retained draws contain NaN")

    @property
    def n_chains(self) -> int:
        return self.chains.shape[0]

    @property
    def n_draws(self) -> int:
        return self.chains.shape[1]

    @property
    def dim(self) -> int:
        return self.chains.shape[2]

    def pooled(self) -> np.ndarray:
        """All chains stacked into ``(n_chains * n_draws, dim)``."""
        return self.chains.reshape(-1, self.dim)

    def column(self, name: str) -> np.ndarray:
        return self.chains[:, :, self.parameter_names.index(name)]


class DualAveraging:
    """Nesterov dual averaging of log step size toward a target acceptance."""

    def __init__(self, step_size: float, target: float, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10.0 * step_size)
        self.target = target
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.t = 0
        self.h_bar = 0.0
        self.log_step = math.log(step_size)
        self.log_step_bar = 0.0

    def update(self, accept_prob: float) -> float:
        self.t += 1
        eta = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_prob)
        self.log_step = self.mu - math.sqrt(self.t) / self.gamma * self.h_bar
        w = self.t ** (-self.kappa)
        self.log_step_bar = w * self.log_step + (1.0 - w) * self.log_step_bar
        return math.exp(self.log_step)

    @property
    def final_step(self) -> float:
        return math.exp(self.log_step_bar)


def leapfrog(q, p, grad_q, step_size, n_steps, inv_metric, gradient):
    """Run ``n_steps`` leapfrog steps; returns ``(q, p, grad_q)``.

    ``gradient`` is the gradient of the log density, so momentum moves
    uphill. Stops early and returns non-finite state if the gradient blows up.
    """
    q = q.copy()
    p = p + 0.5 * step_size * grad_q
    for i in range(n_steps):
        q = q + step_size * inv_metric * p
        grad_q = gradient(q)
        if not np.all(np.isfinite(grad_q)):
            return q, p, grad_q
        if i < n_steps - 1:
            p = p + step_size * grad_q
    p = p + 0.5 * step_size * grad_q
    return q, p, grad_q


def hamiltonian(logp: float, p: np.ndarray, inv_metric: np.ndarray) -> float:
    return -logp + 0.5 * float(np.dot(p * inv_metric, p))


class _Chain:
    def __init__(self, log_density, gradient, dim, config: SamplerConfig, rng):
        self.log_density = log_density
        self.gradient = gradient
        self.dim = dim
        self.config = config
        self.rng = rng
        self.inv_metric = np.ones(dim)
        self.divergences = 0

    def initialize(self, init) -> None:
        cfg = self.config
        for attempt in range(cfg.max_init_attempts):
            if init is not None and attempt == 0:
                q = np.asarray(init, dtype=float).copy()
            elif init is not None:
                q = np.asarray(init, dtype=float) + self.rng.uniform(-cfg.init_radius, cfg.init_radius, self.dim) * 0.1
            else:
                q = self.rng.uniform(-cfg.init_radius, cfg.init_radius, self.dim)
            lp = self.log_density(q)
            if not np.isfinite(lp):
                continue
            g = self.gradient(q)
            if np.all(np.isfinite(g)):
                self.q, self.logp, self.grad = q, float(lp), g
                return
        raise SamplerError(f"no finite initial point after {cfg.max_init_attempts} attempts")

    def transition(self, step_size: float, n_steps: int) -> float:
        """One HMC transition; returns the Metropolis acceptance probability."""
        p0 = self.rng.standard_normal(self.dim) / np.sqrt(self.inv_metric)
        h0 = hamiltonian(self.logp, p0, self.inv_metric)
        q, p, g = leapfrog(self.q, p0, self.grad, step_size, n_steps, self.inv_metric, self.gradient)
        logp = self.log_density(q) if np.all(np.isfinite(g)) else -np.inf
        h1 = hamiltonian(logp, p, self.inv_metric) if np.isfinite(logp) else np.inf
        delta = h1 - h0
        if not np.isfinite(delta) or delta > self.config.divergence_threshold:
            self.divergences += 1
            accept_prob = 0.0
        else:
            accept_prob = min(1.0, math.exp(-delta)) if delta > 0 else 1.0
        # draw the uniform unconditionally so RNG streams stay aligned
        u = self.rng.uniform()
        if accept_prob > 0.0 and u < accept_prob:
            self.q, self.logp, self.grad = q, float(logp), g
        return accept_prob

    def initial_step_size(self) -> float:
        """Double or halve a unit step until one-step acceptance crosses 0.5."""
        step = 1.0
        p0 = self.rng.standard_normal(self.dim) / np.sqrt(self.inv_metric)
        h0 = hamiltonian(self.logp, p0, self.inv_metric)

        def accept(eps):
            q, p, g = leapfrog(self.q, p0, self.grad, eps, 1, self.inv_metric, self.gradient)
            if not np.all(np.isfinite(g)):
                return 0.0
            lp = self.log_density(q)
            if not np.isfinite(lp):
                return 0.0
            d = hamiltonian(lp, p, self.inv_metric) - h0
            return math.exp(min(0.0, -d))

        direction = 1.0 if accept(step) > 0.5 else -1.0
        for _ in range(60):
            if direction > 0 and accept(step) <= 0.5:
                break
            if direction < 0 and accept(step) > 0.5:
                break
            step = step * 2.0 if direction > 0 else step / 2.0
        return step


def _regularized_variance(samples: np.ndarray) -> np.ndarray:
    n = samples.shape[0]
    var = samples.var(axis=0, ddof=1)
    return (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))


def _run_chain(log_density, gradient, dim, config: SamplerConfig, rng, init):
    chain = _Chain(log_density, gradient, dim, config, rng)
    chain.initialize(init)
    n_warm = config.n_warmup
    window_start = n_warm // 2
    metric_switch = int(0.8 * n_warm)
    step = chain.initial_step_size()
    adapter = DualAveraging(step, config.target_accept)
    collected = []
    draws = np.empty((config.n_draws, dim))
    accepted = 0.0

    for it in range(config.n_iterations):
        jitter = 1.0 + config.step_jitter * (2.0 * rng.uniform() - 1.0)
        if it < n_warm:
            accept_prob = chain.transition(step * jitter, config.leapfrog_steps)
            step = adapter.update(accept_prob)
            if window_start <= it < metric_switch:
                collected.append(chain.q.copy())
            if it + 1 == metric_switch and len(collected) >= 10:
                chain.inv_metric = _regularized_variance(np.asarray(collected))
                step = chain.initial_step_size()
                adapter = DualAveraging(step, config.target_accept)
            if it + 1 == n_warm:
                step = adapter.final_step
        else:
            if it == n_warm:
                chain.divergences = 0
            accepted += chain.transition(step * jitter, config.leapfrog_steps)
            draws[it - n_warm] = chain.q
    return draws, accepted / config.n_draws, chain.divergences, step, chain.inv_metric


def hmc_sample(
    log_density: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    dim: int,
    config: SamplerConfig,
    parameter_names: list[str] | None = None,
    init: np.ndarray | None = None,
) -> PosteriorDraws:
    """Draw from a differentiable log density with multi-chain HMC.

    Each chain gets its own generator spawned from ``config.seed``, so a
    given seed and config reproduce the draws exactly.

    Parameters
    ----------
    log_density, gradient
        Unnormalized log density on R^dim and its gradient.
    dim
        Dimension of the parameter space.
    config
        Sampler settings.
    parameter_names
        Labels for each coordinate; defaults to ``theta[i]``.
    init
        Optional starting point shared by all chains (jittered on retries).
    """
    names = parameter_names or [f"theta[{i}]" for i in range(dim)]
    streams = np.random.SeedSequence(config.seed).spawn(config.n_chains)
    chains, rates, divs, steps, metrics = [], [], [], [], []
    for c, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        draws, rate, ndiv, step, metric = _run_chain(log_density, gradient, dim, config, rng, init)
        log.debug("chain %d: accept=%.3f divergences=%d step=%.4g", c, rate, ndiv, step)
        chains.append(draws)
        rates.append(rate)
        divs.append(ndiv)
        steps.append(step)
        metrics.append(metric)
    return PosteriorDraws(
        chains=np.stack(chains),
        parameter_names=list(names),
        accept_rate=np.array(rates),
        divergences=np.array(divs, dtype=int),
        step_size=np.array(steps),
        inv_metric=np.stack(metrics),
        seed=config.seed,
    )
