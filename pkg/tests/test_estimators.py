import numpy as np
import pytest

from mpe.classifier import Sample, TrainConfig, fit
from mpe.estimators import (
    EnEstimator,
    KmConfig,
    KmEstimator,
    RocConfig,
    RocEstimator,
    empirical_kappa,
    en_from_scores,
    en_estimate,
    km_estimate,
    make_estimator,
    project_to_simplex,
    roc_estimate,
    roc_from_scores,
)
from mpe.measure import DiscreteDistribution, kappa_max


def sample_discrete(dist, n, rng):
    """Draw identity-scored points from a discrete distribution over ints."""
    return rng.choice(np.asarray(dist.support, dtype=float), size=n, p=dist.mass)


def gaussian_mixture_pair(seed, n=1600, kappa=0.3, sep=10.0, dim=1):
    rng = np.random.default_rng(seed)
    n_comp = int(round(kappa * n))
    f_pts = np.vstack([
        rng.normal(sep, 1.0, (n_comp, dim)),
        rng.normal(0.0, 1.0, (n - n_comp, dim)),
    ])
    h_pts = rng.normal(sep, 1.0, (n, dim))
    return Sample(f_pts, "mixture"), Sample(h_pts, "component")


class TestSimplexProjection:
    def test_projection_lands_on_simplex(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            v = rng.normal(scale=5.0, size=int(rng.integers(1, 40)))
            w = project_to_simplex(v)
            assert (w >= 0).all()
            assert abs(w.sum() - 1.0) < 1e-10

    def test_simplex_points_are_fixed(self):
        w = np.array([0.2, 0.5, 0.3])
        np.testing.assert_allclose(project_to_simplex(w), w, atol=1e-12)


class TestEmpiricalKappa:
    def test_identical_scores_trace_near_one(self):
        rng = np.random.default_rng(1)
        scores = rng.normal(size=4000)
        thresholds = np.linspace(scores.min(), scores.max(), 100)
        trace = empirical_kappa(scores, scores, thresholds)
        ratios = trace["ratio"][trace["valid"]]
        np.testing.assert_allclose(ratios, 1.0, atol=1e-12)

    def test_mass_floor_excludes_extreme_thresholds(self):
        scores_h = np.linspace(0, 1, 100)
        trace = empirical_kappa(scores_h, scores_h, np.array([0.99, 1.5]), 0.05)
        assert not trace["valid"].any()

    def test_matches_discrete_oracle_on_expanded_samples(self):
        # ratios descend along the identity ordering, so the minimizing
        # upper-level set realizes the subset minimum
        f = DiscreteDistribution(tuple(range(6)), [0.30, 0.22, 0.18, 0.12, 0.10, 0.08])
        h = DiscreteDistribution(tuple(range(6)), [0.05, 0.08, 0.12, 0.20, 0.25, 0.30])
        truth = kappa_max(f, h)
        rng = np.random.default_rng(101)
        est = roc_from_scores(
            sample_discrete(f, 5000, rng), sample_discrete(h, 5000, rng),
            RocConfig(penalty_scale=0.0),
        )
        assert abs(est.kappa_hat - truth) < 0.05


def component_density(x, mean=10.0):
    return np.exp(-0.5 * (x - mean) ** 2) / np.sqrt(2 * np.pi)


class TestRoc:
    def test_known_proportion_with_exact_density_scores(self):
        # true component density as the score: the plug-in minimum without
        # penalty recovers the drawn proportion
        for seed in range(10):
            x_f, x_h = gaussian_mixture_pair(seed, n=1600, kappa=0.3)
            est = roc_from_scores(
                component_density(x_f.points[:, 0]),
                component_density(x_h.points[:, 0]),
                RocConfig(penalty_scale=0.0),
                seed,
            )
            assert 0.25 <= est.kappa_hat <= 0.35

    def test_degenerate_scores_rejected(self):
        ones = np.ones(100)
        with pytest.raises(ValueError, match="degenerate score"):
            roc_from_scores(ones, ones)

    def test_identical_generators_estimate_near_one(self):
        rng = np.random.default_rng(3)
        s_f = rng.normal(size=1600)
        s_h = rng.normal(size=1600)
        est = roc_from_scores(s_f, s_h)
        assert est.kappa_hat >= 0.9

    def test_disjoint_supports_estimate_near_zero(self):
        rng = np.random.default_rng(4)
        s_f = rng.normal(0.0, 1.0, size=1600)
        s_h = rng.normal(50.0, 1.0, size=1600)
        est = roc_from_scores(s_f, s_h)
        assert est.kappa_hat <= 0.1

    def test_model_backed_estimate_on_disjoint_blobs(self):
        x_f, x_h = gaussian_mixture_pair(5, n=400, kappa=0.0, sep=12.0, dim=2)
        model = fit(x_f, x_h, TrainConfig(epochs=30, seed=5))
        est = roc_estimate(x_f, x_h, model)
        assert est.kappa_hat <= 0.1

    def test_diagnostics_record_full_trace(self):
        rng = np.random.default_rng(6)
        est = roc_from_scores(rng.normal(size=500), rng.normal(size=500))
        assert len(est.diagnostics["thresholds"]) == RocConfig().grid_size
        assert {"f_frac", "h_frac", "penalty", "argmin_threshold"} <= est.diagnostics.keys()


class TestEn:
    def test_unit_scores_give_unit_estimate(self):
        est = en_from_scores(np.ones(100), np.ones(100))
        assert est.kappa_hat == 1.0

    def test_zero_mixture_scores_give_zero(self):
        est = en_from_scores(np.zeros(100), np.ones(100))
        assert est.kappa_hat == 0.0

    def test_degenerate_calibration_rejected(self):
        with pytest.raises(ValueError, match="degenerate labeling"):
            en_from_scores(np.ones(100), np.zeros(100))

    def test_deterministic_given_scores_and_seed(self):
        rng = np.random.default_rng(7)
        s_f, s_h = rng.random(300), rng.random(300)
        a = en_from_scores(s_f, s_h, seed=11)
        b = en_from_scores(s_f, s_h, seed=11)
        assert a.kappa_hat == b.kappa_hat
        assert a.diagnostics["c"] == b.diagnostics["c"]

    def test_separated_gaussians_recover_half(self):
        cfg = TrainConfig(epochs=40)
        estimates = []
        for seed in range(10):
            x_f, x_h = gaussian_mixture_pair(seed, n=1600, kappa=0.5)
            model = fit(x_f, x_h, TrainConfig(epochs=40, seed=seed))
            est = EnEstimator(cfg).estimate(x_f, x_h, model=model, seed=seed)
            estimates.append(est.kappa_hat)
        assert all(0.4 <= k <= 0.6 for k in estimates)


class TestKm:
    def test_identical_samples_estimate_one(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(100, 3))
        est = km_estimate(Sample(pts, "mixture"), Sample(pts, "component"))
        assert est.kappa_hat >= 0.9
        assert np.max(est.diagnostics["distances"]) < 1e-8

    def test_disjoint_supports_estimate_near_zero(self):
        rng = np.random.default_rng(1)
        x_f = Sample(rng.normal(0, 1, (200, 1)), "mixture")
        x_h = Sample(rng.normal(50, 1, (200, 1)), "component")
        for variant in ("km1", "km2"):
            est = km_estimate(x_f, x_h, KmConfig(variant=variant))
            assert est.kappa_hat <= 0.1

    def test_ten_dim_half_mixture_km2(self):
        for seed in range(10):
            x_f, x_h = gaussian_mixture_pair(seed, n=800, kappa=0.5, dim=10)
            est = km_estimate(x_f, x_h, KmConfig(variant="km2"), seed)
            assert abs(est.kappa_hat - 0.5) <= 0.15

    def test_ten_dim_half_mixture_km1(self):
        for seed in range(3):
            x_f, x_h = gaussian_mixture_pair(seed, n=800, kappa=0.5, dim=10)
            est = km_estimate(x_f, x_h, KmConfig(variant="km1"), seed)
            assert abs(est.kappa_hat - 0.5) <= 0.15

    def test_distance_curve_monotone_within_tolerance(self):
        x_f, x_h = gaussian_mixture_pair(3, n=400, kappa=0.4, dim=10)
        est = km_estimate(x_f, x_h, KmConfig(), 3)
        d = est.diagnostics["distances"]
        assert (d[1:] >= d[:-1] - 1e-3).all()

    def test_minimum_sample_size_enforced(self):
        tiny = Sample(np.zeros((8, 2)), "mixture")
        with pytest.raises(ValueError, match="at least 16"):
            km_estimate(tiny, tiny)


class TestEstimateRange:
    def test_all_methods_stay_in_unit_interval(self):
        rng = np.random.default_rng(9)
        x_f, x_h = gaussian_mixture_pair(9, n=200, kappa=0.7, sep=2.0, dim=3)
        model = fit(x_f, x_h, TrainConfig(epochs=20, seed=9))
        for est in (
            roc_estimate(x_f, x_h, model),
            en_estimate(x_f, x_h, model),
            km_estimate(x_f, x_h),
        ):
            assert 0.0 <= est.kappa_hat <= 1.0


class TestFactory:
    def test_known_names(self):
        assert isinstance(make_estimator("roc"), RocEstimator)
        assert isinstance(make_estimator("en"), EnEstimator)
        assert make_estimator("km1").name == "km1"
        assert make_estimator("km2").name == "km2"

    def test_options_forwarded(self):
        handle = make_estimator("roc", penalty_scale=0.5)
        assert handle.cfg.penalty_scale == 0.5

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError, match="unknown estimator"):
            make_estimator("alphamax")
