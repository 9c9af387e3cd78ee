"""Special functions, Hamiltonian Monte Carlo and convergence diagnostics."""

from .diagnostics import Diagnostics, diagnose, effective_sample_size, split_rhat
from .hmc import PosteriorDraws, SamplerConfig, hmc_sample
from .special import digamma, lgamma

__all__ = [
    "Diagnostics", "PosteriorDraws", "SamplerConfig", "diagnose", "digamma",
    "effective_sample_size", "hmc_sample", "lgamma", "split_rhat",
]
