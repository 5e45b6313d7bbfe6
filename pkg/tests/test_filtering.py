"""Particle filter tests against moment and brute-force oracles."""

import numpy as np
import pytest
from scipy import stats

from paris_rml.filtering import (DegeneracyError, ParticleCloud,
                                 effective_sample_size, init_cloud,
                                 predict_estimate, propagate, weight_cloud)
from paris_rml.models import StochasticVolatilityModel, get_model
from paris_rml.rng import RngStream

SV = StochasticVolatilityModel()
THETA = np.array([0.8, 0.1, 1.0])


class TestInitCloud:
    def test_singleton(self):
        cloud = init_cloud(SV, THETA, 1, RngStream(0).generator())
        assert cloud.n == 1 and cloud.weights[0] == 1.0 and cloud.t == 0

    def test_stationary_moments(self):
        n = 100_000
        cloud = init_cloud(SV, THETA, n, RngStream(1).generator())
        var = 0.1 / (1 - 0.64)
        assert abs(cloud.positions.mean()) < 3 * np.sqrt(var / n)
        assert abs(cloud.positions.var() - var) / var < 0.05

    def test_deterministic(self):
        a = init_cloud(SV, THETA, 100, RngStream(2).generator())
        b = init_cloud(SV, THETA, 100, RngStream(2).generator())
        assert np.array_equal(a.positions, b.positions)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            init_cloud(SV, THETA, 0, RngStream(0).generator())


class TestWeightCloud:
    def test_gaussian_density_value(self):
        cloud = ParticleCloud(np.array([0.0]), np.array([1.0]), t=0)
        weighted = weight_cloud(cloud, 0.0, THETA, SV)
        assert weighted.weights[0] == pytest.approx(1.0 / np.sqrt(2 * np.pi))
        assert np.array_equal(weighted.positions, cloud.positions)

    def test_constant_emission_gives_uniform(self):
        # LGSSM with obs_coeff 0: emission density does not depend on x.
        model = get_model("lgssm", obs_coeff=0.0)
        cloud = init_cloud(model, THETA, 50, RngStream(3).generator())
        weighted = weight_cloud(cloud, 0.7, THETA, model)
        assert np.allclose(weighted.weights, weighted.weights[0])

    def test_underflow_raises_degeneracy(self):
        cloud = init_cloud(SV, THETA, 50, RngStream(4).generator())
        with pytest.raises(DegeneracyError) as excinfo:
            weight_cloud(cloud, 1e160, THETA, SV)
        assert excinfo.value.t == 0


class TestPropagate:
    def test_singleton(self):
        cloud = ParticleCloud(np.array([0.5]), np.array([1.0]), t=3)
        new_cloud, ancestors = propagate(cloud, THETA, SV, RngStream(5).generator())
        assert ancestors.tolist() == [0]
        assert new_cloud.t == 4
        assert np.allclose(new_cloud.weights, 1.0)

    def test_near_degenerate_kernel_band(self):
        theta = np.array([0.0, 1e-4, 1.0])
        cloud = ParticleCloud(np.linspace(-2, 2, 10_000), np.full(10_000, 1e-4), t=0)
        new_cloud, _ = propagate(cloud, theta, SV, RngStream(6).generator())
        # phi = 0 and sigma = 0.01: positions collapse into a tight band at 0.
        assert np.abs(new_cloud.positions).max() < 6 * np.sqrt(1e-4)

    def test_uniform_weights_after_propagate(self):
        cloud = init_cloud(SV, THETA, 256, RngStream(7).generator())
        weighted = weight_cloud(cloud, 0.3, THETA, SV)
        new_cloud, _ = propagate(weighted, THETA, SV, RngStream(8).generator())
        assert np.all(new_cloud.weights == 1.0 / 256)
        assert new_cloud.weights.sum() == pytest.approx(1.0)

    def test_predictive_mean_against_brute_force(self):
        n = 10_000
        cloud = init_cloud(SV, THETA, n, RngStream(9).generator())
        weighted = weight_cloud(cloud, 0.6, THETA, SV)
        new_cloud, _ = propagate(weighted, THETA, SV, RngStream(10).generator())

        # Independent brute force: resample-propagate a million draws from
        # the same weighted cloud with a plain numpy generator.
        brute_gen = np.random.default_rng(123)
        p = weighted.weights / weighted.weights.sum()
        anc = brute_gen.choice(n, size=1_000_000, p=p)
        brute = 0.8 * weighted.positions[anc] + np.sqrt(0.1) * brute_gen.standard_normal(1_000_000)
        tol = 3 * (brute.std() / np.sqrt(brute.size) + new_cloud.positions.std() / np.sqrt(n))
        assert abs(new_cloud.positions.mean() - brute.mean()) < tol

    def test_ancestor_law_matches_weights(self):
        n = 50
        gen = RngStream(11).generator()
        positions = np.zeros(n)
        weights = gen.random(n)
        cloud = ParticleCloud(positions, weights, t=0)
        counts = np.zeros(n)
        reps = 400
        for k in range(reps):
            _, ancestors = propagate(cloud, THETA, SV, RngStream(12).child(k).generator())
            counts += np.bincount(ancestors, minlength=n)
        expected = weights / weights.sum() * reps * n
        pvalue = stats.chisquare(counts, f_exp=expected).pvalue
        assert pvalue > 1e-3, f"chi-square p={pvalue}"


class TestPredictEstimate:
    def test_normalization(self):
        cloud = init_cloud(SV, THETA, 32, RngStream(13).generator())
        assert predict_estimate(cloud, lambda x: np.ones_like(x)) == 1.0

    def test_symmetry(self):
        cloud = ParticleCloud(np.array([-1.3, 1.3]), np.array([0.5, 0.5]), t=0)
        assert predict_estimate(cloud, lambda x: x) == 0.0

    def test_indicator_on_stationary_cloud(self):
        n = 100_000
        cloud = init_cloud(SV, THETA, n, RngStream(14).generator())
        p = predict_estimate(cloud, lambda x: (x > 0).astype(float))
        assert abs(p - 0.5) < 3 * 0.5 / np.sqrt(n)

    def test_requires_uniform_weights(self):
        cloud = ParticleCloud(np.array([0.0, 1.0]), np.array([0.2, 0.8]), t=0)
        with pytest.raises(ValueError):
            predict_estimate(cloud, lambda x: x)


class TestCloudValidation:
    def test_effective_sample_size(self):
        assert effective_sample_size(np.full(10, 0.1)) == pytest.approx(10.0)
        assert effective_sample_size(np.array([1.0, 0.0])) == pytest.approx(1.0)
        assert effective_sample_size(np.zeros(3)) == 0.0

    def test_rejects_bad_arrays(self):
        with pytest.raises(ValueError):
            ParticleCloud(np.array([np.nan]), np.array([1.0]), t=0)
        with pytest.raises(ValueError):
            ParticleCloud(np.array([1.0]), np.array([-0.5]), t=0)
        with pytest.raises(ValueError):
            ParticleCloud(np.array([1.0, 2.0]), np.array([1.0]), t=0)
