import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from snaptiming.clustering import ClusterAssignment
from snaptiming.detection import detect_all
from snaptiming.errors import BuildError, DomainError
from snaptiming.inference.hmc import SamplerConfig
from snaptiming.model import (
    Design,
    ModelConfig,
    ModelPosterior,
    ParameterLayout,
    build_design,
    covariate_names,
    covariate_row,
    design_group_maps,
    fit,
    gamma_logpdf,
    half_t_logpdf,
    log_posterior,
    log_posterior_gradient,
    normal_logpdf,
    read_design,
    write_design_csv,
)
from snaptiming.synthetic import ModelTruth, generate_model_dataset


def naive_log_posterior(theta, design, cfg=ModelConfig()):
    """Term-by-term log posterior built from scipy densities, one row at a time."""
    lay = ParameterLayout.for_design(design)
    p = lay.unpack(theta)
    total = stats.norm(0, cfg.prior_sd_fixed).logpdf(p["gamma0"])
    total += stats.norm(0, cfg.prior_sd_fixed).logpdf(p["beta"]).sum()
    total += stats.norm(0, cfg.prior_sd_fixed).logpdf(p["psi0"])
    for name in ("log_sigma_q", "log_sigma_m", "log_sigma_d", "log_tau_q"):
        s = math.exp(p[name])
        # half Student-t on the SD plus the log-Jacobian of the exp transform
        total += math.log(2.0) + stats.t(cfg.dof, scale=cfg.prior_scale_sd).logpdf(s) + p[name]
    for name in ("z_q", "z_m", "z_d", "w_q"):
        total += stats.norm.logpdf(p[name]).sum()
    for i in range(design.n_rows):
        eta = p["gamma0"] + float(np.dot(design.X[i], p["beta"]))
        eta += math.exp(p["log_sigma_q"]) * p["z_q"][design.qb[i]]
        eta += math.exp(p["log_sigma_m"]) * p["z_m"][design.motion[i]]
        eta += math.exp(p["log_sigma_d"]) * p["z_d"][design.defense[i]]
        alpha = math.exp(p["psi0"] + math.exp(p["log_tau_q"]) * p["w_q"][design.qb[i]])
        total += stats.gamma.logpdf(design.delta[i], a=alpha, scale=math.exp(eta) / alpha)
    return float(total)


def small_design(n_rows=10, seed=0, n_qb=3, n_motion=4, n_defense=2):
    truth = ModelTruth(n_qb=n_qb, n_motion=n_motion, n_defense=n_defense)
    design, _ = generate_model_dataset(truth, n_rows, seed)
    return design


def empty_like(design):
    return Design(np.zeros(0), np.zeros((0, design.n_covariates)), [], [], [], design.covariate_names,
                  design.qb_ids, design.motion_ids, design.defense_ids)


def random_theta(dim, rng, scale=0.5, layout=None):
    """Random unconstrained point; with ``layout``, kept where snap timings are plausible."""
    theta = rng.normal(0.0, scale, dim)
    if layout is not None:
        s = layout.slices()
        theta[s["gamma0"]] += math.log(17.0)
        # play clock values run to 25 s, so its coefficient lives on a smaller scale
        theta[s["beta"].start + 3] *= 0.05
    return theta


class TestCovariates:
    def test_reference_cell(self):
        row = covariate_row(1, 12.5, 0, "RB", 1, 1, 6)
        dummies = np.delete(row, [3, 9])
        assert np.all(dummies == 0)

    def test_three_dummies(self):
        row = covariate_row(3, 12.5, 0, "TE", 1, 3, 6)
        names = covariate_names(6)
        on = {names[j] for j in np.flatnonzero(np.delete(row, [3, 9]) == 1)}
        on = {n for n in names if n not in ("play_clock_at_motion", "motion_players_since_lineset")
              and row[names.index(n)] == 1}
        assert on == {"down:3", "position:TE", "motion:3"}

    def test_width(self):
        assert len(covariate_names(6)) == 15
        assert len(covariate_row(2, 10.0, 1, "WR", 2, 6, 6)) == 15

    @pytest.mark.parametrize("args", [(0, 10.0, 0, "RB", 1, 1), (1, 10.0, 4, "RB", 1, 1),
                                      (1, 10.0, 0, "QB", 1, 1), (1, 10.0, 0, "RB", 1, 7)])
    def test_invalid(self, args):
        with pytest.raises(BuildError):
            covariate_row(*args, 6)


class TestBuildDesign:
    def test_from_corpus(self, small_plays):
        timings = {t.key: t for t in detect_all(small_plays, 0.45)}
        labels = {p.key: i % 6 for i, p in enumerate(small_plays)}
        design = build_design(small_plays, timings, labels, 6)
        assert design.n_rows == len(small_plays)
        np.testing.assert_array_equal(design.delta, [timings[k].delta for k in design.keys])
        assert design.n_qb == len({p.qb_id for p in small_plays})
        play = small_plays[0]
        assert design.X[0, 3] == pytest.approx(play.play_clock_at_motion)

    def test_accepts_assignments(self, small_plays):
        timings = {t.key: t for t in detect_all(small_plays, 0.45)}
        labels = {p.key: ClusterAssignment(*p.key, np.eye(6)[1]) for p in small_plays}
        design = build_design(small_plays, timings, labels, 6)
        assert np.all(design.X[:, covariate_names(6).index("motion:2")] == 1)

    def test_clock_derived_from_snap_clock(self, small_plays):
        timings = {t.key: t for t in detect_all(small_plays, 0.45)}
        play = small_plays[0].__class__(**{**small_plays[0].__dict__, "play_clock_at_motion": None})
        design = build_design([play], timings, {play.key: 0}, 6)
        assert design.X[0, 3] == pytest.approx(play.play_clock_at_snap + timings[play.key].delta / 10.0)

    def test_missing_timing(self, small_plays):
        with pytest.raises(BuildError, match="no snap timing"):
            build_design(small_plays[:1], {}, {small_plays[0].key: 0})

    def test_full_column_rank(self):
        design = small_design(2000, seed=3, n_qb=10, n_motion=20, n_defense=8)
        A = np.column_stack([np.ones(design.n_rows), design.X])
        assert np.linalg.matrix_rank(A) == A.shape[1]

    def test_csv_round_trip(self):
        design = small_design(25)
        buf = io.StringIO()
        write_design_csv(design, buf)
        buf.seek(0)
        maps = json.loads(json.dumps(design_group_maps(design)))
        back = read_design(buf, maps)
        np.testing.assert_array_equal(back.delta, design.delta)
        np.testing.assert_array_equal(back.X, design.X)
        np.testing.assert_array_equal(back.qb, design.qb)
        assert back.keys == design.keys

    def test_non_positive_delta(self):
        with pytest.raises(BuildError):
            Design([0.0], np.zeros((1, 15)), [0], [0], [0], covariate_names(6), ("a",), ("b",), ("c",))


class TestDensities:
    def test_unit_exponential(self):
        assert gamma_logpdf(1.0, 1.0, 1.0) == pytest.approx(-1.0, abs=1e-14)

    def test_shape_two(self):
        assert gamma_logpdf(2.0, 2.0, 2.0) == pytest.approx(math.log(2.0) - 2.0, abs=1e-14)

    def test_quadrature_normalization(self):
        x, mu, alpha = 17.0, 20.0, 4.0
        rate = alpha / mu
        norm, _ = integrate.quad(lambda t: t ** (alpha - 1) * math.exp(-rate * t), 0, np.inf, epsabs=1e-14, epsrel=1e-13)
        expected = (alpha - 1) * math.log(x) - rate * x - math.log(norm)
        assert abs(gamma_logpdf(x, mu, alpha) - expected) <= 1e-9

    def test_matches_scipy(self, rng):
        x = np.exp(rng.uniform(-3, 6, 1000))
        mu = np.exp(rng.uniform(-2, 5, 1000))
        alpha = np.exp(rng.uniform(-2, 5, 1000))
        ours = gamma_logpdf(x, mu, alpha)
        ref = stats.gamma.logpdf(x, a=alpha, scale=mu / alpha)
        np.testing.assert_allclose(ours, ref, rtol=1e-12, atol=1e-10)

    @pytest.mark.parametrize("bad", [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0)])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            gamma_logpdf(*bad)

    def test_half_t(self):
        for s in (0.01, 0.3, 2.0, 11.0):
            ref = math.log(2.0) + stats.t(3, scale=2.5).logpdf(s)
            assert half_t_logpdf(s, 2.5, 3.0) == pytest.approx(ref, abs=1e-12)


class TestLogPosterior:
    def test_empty_design_is_prior(self, rng):
        design = empty_like(small_design())
        lay = ParameterLayout.for_design(design)
        theta = random_theta(lay.dim, rng)
        p = lay.unpack(theta)
        cfg = ModelConfig()
        expected = normal_logpdf(p["gamma0"], 10.0) + normal_logpdf(p["beta"], 10.0) + normal_logpdf(p["psi0"], 10.0)
        for name in ("log_sigma_q", "log_sigma_m", "log_sigma_d", "log_tau_q"):
            expected += half_t_logpdf(math.exp(p[name]), cfg.prior_scale_sd, cfg.dof) + p[name]
        for name in ("z_q", "z_m", "z_d", "w_q"):
            expected += normal_logpdf(p[name])
        assert log_posterior(theta, design) == pytest.approx(expected, abs=1e-10)

    def test_single_row_substitution(self):
        g0 = 2.7
        design = Design([math.exp(g0)], np.zeros((1, 15)), [0], [0], [0], covariate_names(6), ("q",), ("m",), ("d",))
        lay = ParameterLayout.for_design(design)
        theta = lay.pack(gamma0=g0)
        lik = log_posterior(theta, design) - log_posterior(theta, empty_like(design))
        assert lik == pytest.approx(gamma_logpdf(math.exp(g0), math.exp(g0), 1.0), abs=1e-10)

    def test_matches_naive_summation(self, rng):
        design = small_design(40, seed=1)
        lay = ParameterLayout.for_design(design)
        for _ in range(20):
            theta = random_theta(lay.dim, rng)
            assert log_posterior(theta, design) == pytest.approx(naive_log_posterior(theta, design), abs=1e-10, rel=1e-13)

    def test_depends_on_effects_not_their_split(self, rng):
        design = small_design(30, seed=2)
        lay = ParameterLayout.for_design(design)
        empty = empty_like(design)
        theta = random_theta(lay.dim, rng)
        other = theta.copy()
        s = lay.slices()
        # scale sigma_q up by e and z_q down by e: b_q = sigma_q * z_q is unchanged
        other[s["log_sigma_q"]] += 1.0
        other[s["z_q"]] /= math.e
        lik_a = log_posterior(theta, design) - log_posterior(theta, empty)
        lik_b = log_posterior(other, design) - log_posterior(other, empty)
        assert lik_a == pytest.approx(lik_b, abs=1e-9)

    @given(st.integers(0, 10_000), st.floats(0.1, 1.5))
    @settings(max_examples=50, deadline=None)
    def test_finite_for_finite_params(self, seed, scale):
        # bounded so exp() of every linear predictor stays inside double range
        design = small_design(15, seed=seed % 7)
        lay = ParameterLayout.for_design(design)
        theta = random_theta(lay.dim, np.random.default_rng(seed), scale, layout=lay)
        assert np.isfinite(log_posterior(theta, design))

    def test_overflow_gives_minus_inf(self):
        design = small_design(5)
        lay = ParameterLayout.for_design(design)
        theta = lay.pack(psi0=-800.0)
        assert log_posterior(theta, design) == -np.inf


class TestGradient:
    def test_length(self):
        design = small_design(10, n_qb=3, n_motion=4, n_defense=2)
        assert len(log_posterior_gradient(np.zeros(21 + 2 * 3 + 4 + 2), design)) == 21 + 2 * 3 + 4 + 2

    def test_prior_only_standard_normal_score(self, rng):
        design = empty_like(small_design())
        lay = ParameterLayout.for_design(design)
        theta = random_theta(lay.dim, rng)
        grad = log_posterior_gradient(theta, design)
        for name in ("z_q", "z_m", "z_d", "w_q"):
            np.testing.assert_allclose(grad[lay.slices()[name]], -theta[lay.slices()[name]], atol=1e-14)

    def test_finite_differences(self, rng):
        design = small_design(10, seed=4)
        post = ModelPosterior(design)
        h = 1e-5
        worst = 0.0
        for _ in range(100):
            theta = random_theta(post.dim, rng, layout=post.layout)
            grad = post.gradient(theta)
            fd = np.empty(post.dim)
            for j in range(post.dim):
                e = np.zeros(post.dim)
                e[j] = h
                fd[j] = (post.log_density(theta + e) - post.log_density(theta - e)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(grad - fd) / np.maximum(1.0, np.abs(fd)))))
        assert worst < 1e-5

    def test_gradient_matches_naive_density(self, rng):
        design = small_design(8, seed=6)
        lay = ParameterLayout.for_design(design)
        theta = random_theta(lay.dim, rng, layout=lay)
        h = 1e-5
        j = lay.slices()["log_tau_q"].start
        e = np.zeros(lay.dim)
        e[j] = h
        fd = (naive_log_posterior(theta + e, design) - naive_log_posterior(theta - e, design)) / (2 * h)
        assert log_posterior_gradient(theta, design)[j] == pytest.approx(fd, rel=1e-6, abs=1e-6)


class TestFit:
    def test_short_fit_shapes(self):
        design = small_design(200, seed=5, n_qb=4, n_motion=6, n_defense=3)
        result = fit(design, SamplerConfig(n_chains=2, n_iterations=200, n_warmup=100, seed=1))
        assert result.draws.chains.shape == (2, 100, result.layout.dim)
        real = result.realized()
        assert real["u_q"].shape == (200, 4)
        assert np.all(real["tau_q"] > 0)
        assert np.isfinite(result.diagnostics.max_rhat)

    def test_seeded_fit_reproducible(self):
        design = small_design(60, seed=5)
        cfg = SamplerConfig(n_chains=2, n_iterations=60, n_warmup=30, seed=3)
        a, b = fit(design, cfg), fit(design, cfg)
        np.testing.assert_array_equal(a.draws.chains, b.draws.chains)
