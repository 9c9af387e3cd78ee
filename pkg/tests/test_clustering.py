import io
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from helpers import make_play
from snaptiming.clustering import (
    FALLBACK_FRAMES,
    FAMILIES,
    GmmModel,
    bic_score,
    em_fit,
    extract_motion_features,
    l_sideline_frame,
    n_parameters,
    read_assignments,
    read_features,
    select_model,
    write_assignments,
    write_features,
)
from snaptiming.detection import SnapTiming, compute_snap_timing, detect_all
from snaptiming.synthetic import ARCHETYPES, feature_benchmark


def _timing(t_motion, t_snap, t_lineset=10):
    return SnapTiming("g", "1", t_lineset, t_motion, t_snap, "event_tag")


class TestFeatures:
    def test_coincident_points(self):
        n = 100
        play = make_play(np.ones(n), 10, 50, motion_xy=(np.full(n, 50.0), np.full(n, 26.65)))
        f = extract_motion_features(play, _timing(30, 50), mirror=False)
        assert f.b_sideline == 0.0 and f.b_endzone == 0.0

    def test_displacement_at_snap(self):
        n = 100
        play = make_play(np.ones(n), 10, 50, motion_xy=(np.full(n, 50.0), np.full(n, 20.0)))
        f = extract_motion_features(play, _timing(30, 50), mirror=False)
        assert f.b_sideline == pytest.approx(-6.65)
        assert f.b_endzone == pytest.approx(0.0)

    def test_mirroring_makes_start_offset_non_negative(self):
        n = 100
        play = make_play(np.ones(n), 10, 50, motion_xy=(np.full(n, 45.0), np.full(n, 20.0)))
        f = extract_motion_features(play, _timing(30, 50))
        assert f.mirrored and f.m_sideline == pytest.approx(6.65) and f.b_sideline == pytest.approx(6.65)
        assert f.b_endzone == pytest.approx(-5.0)

    def test_no_crossing_no_qb_event_reads_three_seconds_after_snap(self):
        n = 120
        frames = np.arange(1, n + 1)
        y = 10.0 + 0.1 * frames
        play = make_play(np.ones(n), 10, 50, motion_xy=(np.full(n, 45.0), y))
        assert l_sideline_frame(play, 50) == 50 + FALLBACK_FRAMES
        f = extract_motion_features(play, _timing(30, 50), mirror=False)
        assert f.l_sideline == pytest.approx(y[50 + FALLBACK_FRAMES - 1] - 26.65)

    def test_qb_event_before_three_seconds(self):
        n = 120
        play = make_play(np.ones(n), 10, 50, motion_xy=(np.full(n, 45.0), np.full(n, 20.0)),
                         qb_events={62: "pass_forward"})
        assert l_sideline_frame(play, 50) == 62

    def test_crossing_frame(self):
        n = 120
        frames = np.arange(1, n + 1)
        x = np.where(frames <= 50, 48.0, 48.0 + 0.5 * (frames - 50))
        # x reaches 50 exactly on frame 54; the crossing needs strictly beyond the line
        play = make_play(np.ones(n), 10, 50, motion_xy=(x, np.full(n, 20.0)))
        assert l_sideline_frame(play, 50) == 55

    def test_fixture_play_side(self, fixture_play):
        f = extract_motion_features(fixture_play, compute_snap_timing(fixture_play, 0.45))
        assert f.mirrored and f.m_sideline > 0
        assert f.b_sideline == pytest.approx(23.70 - 18.67)

    def test_csv_round_trip(self, small_plays):
        timings = {t.key: t for t in detect_all(small_plays, 0.45)}
        feats = [extract_motion_features(p, timings[p.key]) for p in small_plays]
        buf = io.StringIO()
        write_features(feats, buf)
        buf.seek(0)
        back = read_features(buf)
        np.testing.assert_allclose([f.as_array() for f in back], [f.as_array() for f in feats])


class TestBic:
    def test_zero(self):
        assert bic_score(SimpleNamespace(loglik=0.0, n_params=0), 10) == 0.0

    def test_formula(self):
        # one component in nine dimensions with a spherical covariance has ten parameters
        model = GmmModel(np.ones(1), np.zeros((1, 9)), np.eye(9)[None], "EII", -100.0, 5)
        assert model.n_params == 10
        assert bic_score(model, math.e) == pytest.approx(-210.0)

    @pytest.mark.parametrize("family,G,d,k", [("EII", 2, 4, 1 + 8 + 1), ("VII", 3, 4, 2 + 12 + 3),
                                              ("VVI", 2, 4, 1 + 8 + 8), ("VVV", 6, 4, 5 + 24 + 60)])
    def test_parameter_counts(self, family, G, d, k):
        assert n_parameters(family, G, d) == k


def two_blobs(rng, n=200, sep=10.0):
    a = rng.normal(0.0, 1.0, (n, 2))
    b = rng.normal(0.0, 1.0, (n, 2)) + [sep, 0.0]
    return np.vstack([a, b]), np.r_[np.zeros(n), np.ones(n)]


class TestEm:
    def test_single_component_closed_form(self, rng):
        X = rng.normal(size=(300, 4)) @ rng.normal(size=(4, 4))
        model = em_fit(X, 1, "VVV")
        np.testing.assert_allclose(model.means[0], X.mean(axis=0), atol=1e-10)
        np.testing.assert_allclose(model.covariances[0], np.cov(X.T, bias=True), atol=1e-10)

    def test_two_separated_blobs(self, rng):
        X, labels = two_blobs(rng, n=2000)
        model = em_fit(X, 2, "VVV", seed=1)
        means = model.means[np.argsort(model.means[:, 0])]
        np.testing.assert_allclose(means, [[0.0, 0.0], [10.0, 0.0]], atol=0.1)
        # with no overlap the maximum-likelihood means are the per-blob sample means
        np.testing.assert_allclose(means, [X[labels == 0].mean(axis=0), X[labels == 1].mean(axis=0)], atol=1e-6)
        hard = model.responsibilities(X).argmax(axis=1)
        assert adjusted_rand_score(labels, hard) == 1.0

    @pytest.mark.parametrize("family", FAMILIES)
    def test_nested_loglik(self, family, rng):
        X, _ = two_blobs(rng, n=80, sep=4.0)
        base = em_fit(X, 1, "VVV").loglik
        for G in (2, 3):
            assert em_fit(X, G, "VVV", seed=2).loglik >= base - 1e-8

    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("G", [2, 4, 6])
    def test_monotone_trace(self, family, G):
        X, _ = feature_benchmark(40, seed=G)
        model = em_fit(X, G, family, seed=3)
        assert np.all(np.diff(model.loglik_trace) >= -1e-9)

    def test_increasing_components_never_lowers_best_loglik(self, rng):
        X, _ = two_blobs(rng, n=60, sep=6.0)
        lls = [em_fit(X, G, "VVV", seed=0, n_restarts=10).loglik for G in (1, 2, 3)]
        assert lls[0] <= lls[1] + 1e-8 <= lls[2] + 2e-8

    def test_density_integrates_to_one(self, rng):
        X, _ = two_blobs(rng, n=150, sep=5.0)
        model = em_fit(X, 2, "VVV")
        lo, hi = X.min(axis=0) - 6.0, X.max(axis=0) + 6.0
        U = rng.uniform(lo, hi, size=(400_000, 2))
        integral = np.prod(hi - lo) * np.exp(model.score_samples(U)).mean()
        assert integral == pytest.approx(1.0, rel=0.02)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15, deadline=None)
    def test_responsibilities_normalized(self, seed):
        X, _ = feature_benchmark(10, seed=seed % 1000)
        model = em_fit(X, 3, "VVI", seed=seed)
        resp = model.responsibilities(X)
        np.testing.assert_allclose(resp.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(resp >= 0)

    def test_row_order_does_not_matter(self, rng):
        X, _ = feature_benchmark(30, seed=4)
        perm = rng.permutation(len(X))
        a, b = em_fit(X, 4, "VVV", seed=5), em_fit(X[perm], 4, "VVV", seed=5)
        assert a.loglik == pytest.approx(b.loglik, abs=1e-8)

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            em_fit(np.zeros((2, 4)), 3)


class TestSelection:
    def test_single_tight_blob(self, rng):
        X = rng.normal(0.0, 0.1, (200, 4))
        result = select_model(X, range(1, 5))
        assert result.model.n_components == 1

    def test_archetype_benchmark(self):
        X, labels = feature_benchmark(100, seed=0)
        result = select_model(X, seed=0)
        assert result.model.n_components == len(ARCHETYPES)
        assert adjusted_rand_score(labels, result.labels) >= 0.95

    def test_components_ordered_by_size(self):
        X, _ = feature_benchmark(50, seed=2)
        X = X[: 50 * 5 + 20]
        result = select_model(X, range(5, 7), ("VVV",))
        sizes = np.bincount(result.labels, minlength=result.model.n_components)
        assert np.all(np.diff(sizes) <= 0)

    def test_permutation_invariance(self, rng):
        X, _ = feature_benchmark(60, seed=8)
        perm = rng.permutation(len(X))
        a = select_model(X, range(4, 8), seed=1)
        b = select_model(X[perm], range(4, 8), seed=1)
        assert a.model.n_components == b.model.n_components
        assert a.model.loglik == pytest.approx(b.model.loglik, abs=1e-8)
        assert sorted(np.bincount(a.labels)) == sorted(np.bincount(b.labels))

    def test_assignments_round_trip(self):
        X, _ = feature_benchmark(20, seed=1)
        keys = [("g", str(i)) for i in range(len(X))]
        result = select_model(X, range(2, 4), ("VVV",), keys=keys)
        buf = io.StringIO()
        write_assignments(result.assignments, buf)
        assert buf.getvalue().splitlines()[1].split(",")[2] in {"1", "2", "3"}
        buf.seek(0)
        back = read_assignments(buf)
        assert [a.hard_label for a in back] == [a.hard_label for a in result.assignments]
        np.testing.assert_allclose([a.responsibilities.sum() for a in back], 1.0, atol=1e-12)
