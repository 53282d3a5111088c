"""Target measure construction, moments, densities, and posterior algebra."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from follmer.measures import (
    TargetMeasure,
    entropy_vs_gaussian,
    fisher_vs_gaussian,
    log_density_mu,
    log_density_pt,
    posterior_cov,
    posterior_cov_trace,
    posterior_mean,
    sample_mu,
    sample_posterior,
    sample_pt,
    score_mu,
    score_pt,
)


def mixture_1d():
    # weights (1/4, 3/4), means (-1, 2), variances (4, 1/4); moments below
    # were worked out by hand in exact fractions
    return TargetMeasure.mixture(
        [0.25, 0.75],
        np.array([[-1.0], [2.0]]),
        np.array([[[4.0]], [[0.25]]]),
        name="mix2",
    )


class TestConstructors:
    def test_gaussian_scalar_cov_broadcast(self):
        m = TargetMeasure.gaussian([1.0, -1.0], 2.0)
        assert m.dimension == 2
        assert_allclose(m.covs[0], 2.0 * np.eye(2))

    def test_point_mass(self):
        m = TargetMeasure.point_mass([0.5, 0.5])
        assert m.is_finite_point_set
        assert m.has_degenerate_component
        assert not m.is_smooth
        assert_allclose(m.support_points(), [[0.5, 0.5]])

    def test_from_points_default_weights(self):
        pts = np.array([[1.0, 0.0], [-1.0, 0.0]])
        m = TargetMeasure.from_points(pts)
        assert_allclose(m.weights, [0.5, 0.5])
        assert m.n_components == 2

    def test_mixture_weight_validation(self):
        with pytest.raises(ValueError):
            TargetMeasure.mixture([0.7, 0.7], np.zeros((2, 1)), np.ones((2, 1, 1)))

    def test_config_round_trip(self):
        m = mixture_1d()
        again = TargetMeasure.from_config(m.to_config())
        assert_allclose(again.weights, m.weights)
        assert_allclose(again.means, m.means)
        assert_allclose(again.covs, m.covs)

    def test_smoothness_flags(self):
        assert TargetMeasure.standard_gaussian(3).is_smooth
        assert not TargetMeasure.point_mass([1.0]).is_smooth


class TestMoments:
    """Hand-computed fraction oracles for the pinned two-component mixture."""

    def test_mean(self):
        assert_allclose(mixture_1d().mean_vector(), [5.0 / 4.0])

    def test_second_moment(self):
        assert_allclose(mixture_1d().second_moment(), 71.0 / 16.0)

    def test_covariance(self):
        assert_allclose(mixture_1d().covariance(), [[23.0 / 8.0]])

    def test_fourth_central_moment(self):
        assert_allclose(mixture_1d().fourth_central_moment(), 12747.0 / 256.0)

    def test_moment_radius_clamped_at_three(self):
        # (12747/256)^(1/4) ~ 2.657 so the floor of 3 binds
        assert mixture_1d().moment_radius() == 3.0

    def test_moment_radius_unclamped(self):
        # single Gaussian: E(X-m)^4 = 3 sigma^4, radius = (3)^(1/4) * sigma
        m = TargetMeasure.gaussian([0.0], [[9.0]])
        assert_allclose(m.moment_radius(), (3.0 * 81.0) ** 0.25)

    def test_mc_moment_agreement(self):
        m = mixture_1d()
        x = sample_mu(m, 200_000, np.random.default_rng(0))
        assert_allclose(x.mean(), 1.25, atol=0.02)
        assert_allclose((x**2).mean(), 71.0 / 16.0, atol=0.06)


class TestDensities:
    def test_log_density_pt_single_gaussian(self):
        # p_t for N(m, S) is N(t m, t^2 S + t(1-t) I); compare at points
        m = TargetMeasure.gaussian([1.0], [[2.0]])
        t = 0.6
        var = t**2 * 2.0 + t * (1 - t)
        x = np.array([[0.3], [1.4], [-2.0]])
        expect = -0.5 * np.log(2 * np.pi * var) - 0.5 * (x[:, 0] - t) ** 2 / var
        assert_allclose(log_density_pt(m, t, x), expect, rtol=1e-12)

    def test_score_pt_matches_finite_difference(self):
        m = mixture_1d()
        t = 0.45
        x = np.array([[0.2], [1.1], [-0.7]])
        h = 1e-6
        fd = (log_density_pt(m, t, x + h) - log_density_pt(m, t, x - h)) / (2 * h)
        assert_allclose(score_pt(m, t, x)[:, 0], fd, rtol=1e-6, atol=1e-8)

    def test_score_mu_matches_finite_difference(self):
        m = TargetMeasure.mixture(
            [0.5, 0.5], np.array([[-1.0, 0.0], [1.0, 0.5]]), np.stack([np.eye(2), 0.5 * np.eye(2)])
        )
        x = np.array([[0.3, -0.2], [1.5, 0.9]])
        h = 1e-6
        for axis in range(2):
            e = np.zeros(2)
            e[axis] = h
            fd = (log_density_mu(m, x + e) - log_density_mu(m, x - e)) / (2 * h)
            assert_allclose(score_mu(m, x)[:, axis], fd, rtol=1e-5, atol=1e-7)

    def test_log_density_pt_rejects_bad_time(self):
        m = mixture_1d()
        with pytest.raises(ValueError):
            log_density_pt(m, 0.0, np.zeros((1, 1)))
        with pytest.raises(ValueError):
            score_pt(m, 1.0, np.zeros((1, 1)))


class TestPosterior:
    def test_posterior_mean_frozen_point_set(self):
        # oracle: responsibilities of atoms {-1, 2}, w=(1/4, 3/4) at t=0.3,
        # x=0.5 computed independently and frozen
        m = TargetMeasure.from_points(np.array([[-1.0], [2.0]]), weights=[0.25, 0.75])
        got = posterior_mean(m, 0.3, np.array([[0.5]]))
        assert_allclose(got, [[1.7923166464942073]], rtol=1e-12)

    def test_posterior_mean_score_relation(self):
        # E[X1 | X_t = x] = x/t + (1-t) score_t(x) / ... rearranged:
        # posterior mean and score encode the same object
        m = mixture_1d()
        t = 0.35
        x = np.array([[0.1], [2.2], [-1.3]])
        lhs = (posterior_mean(m, t, x) - x) / (1 - t)
        rhs = x / t + score_pt(m, t, x)
        assert_allclose(lhs, rhs, rtol=1e-9)

    def test_posterior_cov_psd_and_trace(self):
        m = mixture_1d()
        t = 0.5
        x = np.array([[0.0], [1.0]])
        cov = posterior_cov(m, t, x)
        assert cov.shape == (2, 1, 1)
        assert np.all(cov[:, 0, 0] >= 0)
        assert_allclose(posterior_cov_trace(m, t, x), cov[:, 0, 0])

    def test_posterior_cov_monte_carlo(self):
        # simulate (xi, X_t) pairs, bin around a fixed x, compare conditional
        # variance; crude but independent of the analytic path
        m = mixture_1d()
        t = 0.5
        rng = np.random.default_rng(3)
        xi = sample_mu(m, 400_000, rng)
        x = t * xi + np.sqrt(t * (1 - t)) * rng.standard_normal(xi.shape)
        x0 = 0.6
        sel = np.abs(x[:, 0] - x0) < 0.01
        emp = xi[sel, 0].var()
        ana = posterior_cov(m, t, np.array([[x0]]))[0, 0, 0]
        assert sel.sum() > 2000
        assert_allclose(emp, ana, rtol=0.1)

    def test_sample_posterior_moments(self):
        m = mixture_1d()
        t, x = 0.4, np.array([0.8])
        draws = sample_posterior(m, t, x, 200_000, np.random.default_rng(4))
        assert_allclose(draws.mean(axis=0), posterior_mean(m, t, x[None, :])[0], atol=0.02)


class TestSampling:
    def test_sample_pt_matches_interpolation_law(self):
        m = mixture_1d()
        t = 0.7
        rng = np.random.default_rng(5)
        direct = sample_pt(m, t, 300_000, rng)
        xi = sample_mu(m, 300_000, rng)
        manual = t * xi + np.sqrt(t * (1 - t)) * rng.standard_normal(xi.shape)
        assert_allclose(direct.mean(), manual.mean(), atol=0.02)
        assert_allclose(direct.var(), manual.var(), rtol=0.03)

    def test_sample_mu_point_set_support(self):
        m = TargetMeasure.from_points(np.array([[1.0, 0.0], [-1.0, 0.0]]))
        x = sample_mu(m, 1000, np.random.default_rng(6))
        assert set(np.unique(x[:, 0])) <= {1.0, -1.0}


class TestEntropyFisher:
    def test_entropy_closed_form_n11(self):
        m = TargetMeasure.gaussian([1.0], [[1.0]])
        est = entropy_vs_gaussian(m)
        assert est.exact
        assert_allclose(est.value, 0.5, rtol=1e-12)

    def test_fisher_closed_form_n11(self):
        est = fisher_vs_gaussian(TargetMeasure.gaussian([1.0], [[1.0]]))
        assert est.exact
        assert_allclose(est.value, 1.0, rtol=1e-12)

    def test_entropy_closed_form_general_gaussian(self):
        # H(N(m, S) | gamma) = (tr S - d - logdet S + |m|^2) / 2
        m = TargetMeasure.gaussian([0.5, -0.5], np.diag([2.0, 0.5]))
        expect = 0.5 * (2.5 - 2 - np.log(1.0) + 0.5)
        assert_allclose(entropy_vs_gaussian(m).value, expect, rtol=1e-12)

    def test_degenerate_gives_infinite(self):
        m = TargetMeasure.point_mass([0.0, 0.0])
        assert entropy_vs_gaussian(m).infinite
        assert fisher_vs_gaussian(m).infinite

    def test_mc_agrees_with_closed_form_on_disguised_gaussian(self):
        # two identical components force the MC path; the answer is still the
        # single-Gaussian closed form
        mean, cov = np.array([0.7]), np.array([[1.5]])
        disguised = TargetMeasure.mixture([0.5, 0.5], np.stack([mean, mean]), np.stack([cov, cov]))
        exact = entropy_vs_gaussian(TargetMeasure.gaussian(mean, cov)).value
        est = entropy_vs_gaussian(disguised, n_mc=100_000, rng=np.random.default_rng(7))
        assert not est.exact
        assert abs(est.value - exact) < 4 * est.stderr + 1e-4

    def test_fisher_mc_agrees_on_disguised_gaussian(self):
        mean, cov = np.array([0.3]), np.array([[0.8]])
        disguised = TargetMeasure.mixture([0.5, 0.5], np.stack([mean, mean]), np.stack([cov, cov]))
        exact = fisher_vs_gaussian(TargetMeasure.gaussian(mean, cov)).value
        est = fisher_vs_gaussian(disguised, n_mc=100_000, rng=np.random.default_rng(8))
        assert abs(est.value - exact) < 4 * est.stderr + 1e-4
