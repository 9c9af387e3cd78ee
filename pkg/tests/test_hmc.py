import numpy as np
import pytest
from scipy import stats

from snaptiming.errors import SamplerError
from snaptiming.inference import diagnose, effective_sample_size
from snaptiming.inference.hmc import DualAveraging, SamplerConfig, hamiltonian, hmc_sample, leapfrog


def std_normal(dim):
    return (lambda q: -0.5 * float(q @ q)), (lambda q: -q)


def correlated_normal(rho):
    cov = np.array([[1.0, rho], [rho, 1.0]])
    prec = np.linalg.inv(cov)
    return (lambda q: -0.5 * float(q @ prec @ q)), (lambda q: -prec @ q)


class TestLeapfrog:
    def test_energy_conserved_for_small_steps(self):
        logp, grad = std_normal(3)
        q0 = np.array([0.3, -1.2, 0.8])
        p0 = np.array([1.0, 0.5, -0.7])
        inv_metric = np.ones(3)
        q, p, _ = leapfrog(q0, p0, grad(q0), 1e-4, 10, inv_metric, grad)
        h0 = hamiltonian(logp(q0), p0, inv_metric)
        h1 = hamiltonian(logp(q), p, inv_metric)
        assert abs(h1 - h0) < 1e-6

    def test_reversible(self):
        logp, grad = std_normal(2)
        q0, p0 = np.array([0.4, 1.1]), np.array([-0.3, 0.9])
        q, p, g = leapfrog(q0, p0, grad(q0), 0.1, 20, np.ones(2), grad)
        q_back, p_back, _ = leapfrog(q, -p, g, 0.1, 20, np.ones(2), grad)
        np.testing.assert_allclose(q_back, q0, atol=1e-12)
        np.testing.assert_allclose(-p_back, p0, atol=1e-12)


class TestDualAveraging:
    def test_step_shrinks_on_low_acceptance(self):
        da = DualAveraging(1.0, 0.8)
        for _ in range(50):
            da.update(0.1)
        assert da.final_step < 1.0

    def test_step_grows_on_high_acceptance(self):
        da = DualAveraging(0.01, 0.8)
        for _ in range(50):
            da.update(1.0)
        assert da.final_step > 0.01


class TestSampler:
    def test_standard_normal_5d(self):
        logp, grad = std_normal(5)
        draws = hmc_sample(logp, grad, 5, SamplerConfig(n_chains=4, n_iterations=11_000, n_warmup=1_000, seed=1))
        pooled = draws.pooled()
        assert pooled.shape == (40_000, 5)
        np.testing.assert_allclose(pooled.mean(axis=0), 0.0, atol=0.05)
        np.testing.assert_allclose(pooled.var(axis=0), 1.0, atol=0.1)

    def test_correlated_normal(self):
        logp, grad = correlated_normal(0.9)
        draws = hmc_sample(logp, grad, 2, SamplerConfig.desk(seed=2))
        r = np.corrcoef(draws.pooled().T)[0, 1]
        assert r == pytest.approx(0.9, abs=0.05)

    def test_gamma_on_log_scale(self):
        # y = log x with x ~ Gamma(shape 3, rate 1): log p(y) = 3y - e^y
        draws = hmc_sample(lambda y: float(3 * y[0] - np.exp(y[0])), lambda y: 3 - np.exp(y), 1, SamplerConfig.desk(seed=3))
        x = np.exp(draws.chains[:, :, 0])
        ess = effective_sample_size(x)[0]
        mcse = x.std() / np.sqrt(ess)
        assert abs(x.mean() - 3.0) < 3 * mcse

    def test_kolmogorov_smirnov_1d(self):
        logp, grad = std_normal(1)
        draws = hmc_sample(logp, grad, 1, SamplerConfig(n_chains=1, n_iterations=11_000, n_warmup=1_000, seed=4))
        assert stats.kstest(draws.pooled()[:, 0], "norm").pvalue > 0.001

    def test_seed_reproducible(self):
        logp, grad = std_normal(3)
        cfg = SamplerConfig(n_chains=2, n_iterations=300, n_warmup=100, seed=9)
        a = hmc_sample(logp, grad, 3, cfg)
        b = hmc_sample(logp, grad, 3, cfg)
        np.testing.assert_array_equal(a.chains, b.chains)
        c = hmc_sample(logp, grad, 3, SamplerConfig(n_chains=2, n_iterations=300, n_warmup=100, seed=10))
        assert not np.array_equal(a.chains, c.chains)

    def test_chains_differ(self):
        logp, grad = std_normal(2)
        draws = hmc_sample(logp, grad, 2, SamplerConfig(n_chains=3, n_iterations=200, n_warmup=100, seed=0))
        assert not np.array_equal(draws.chains[0], draws.chains[1])

    def test_names_and_columns(self):
        logp, grad = std_normal(2)
        draws = hmc_sample(logp, grad, 2, SamplerConfig(n_chains=2, n_iterations=100, n_warmup=50), ["a", "b"])
        assert draws.column("b").shape == (2, 50)

    def test_unusable_start_raises(self):
        cfg = SamplerConfig(n_chains=1, n_iterations=20, n_warmup=10, max_init_attempts=5)
        with pytest.raises(SamplerError):
            hmc_sample(lambda q: -np.inf, lambda q: np.zeros(1), 1, cfg)

    @pytest.mark.parametrize("kwargs", [dict(n_chains=0), dict(n_warmup=10, n_iterations=10),
                                        dict(target_accept=1.0), dict(leapfrog_steps=0)])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            SamplerConfig(**kwargs)

    def test_desk_defaults(self):
        cfg = SamplerConfig.desk()
        assert (cfg.n_chains, cfg.n_iterations, cfg.n_warmup, cfg.n_draws) == (4, 2000, 1000, 1000)

    def test_diagnostics_on_sampler_output(self):
        logp, grad = std_normal(2)
        draws = hmc_sample(logp, grad, 2, SamplerConfig.desk(seed=5))
        diag = diagnose(draws.chains)
        assert diag.max_rhat <= 1.01
        assert diag.min_ess >= 0.2 * draws.chains.shape[0] * draws.chains.shape[1]
