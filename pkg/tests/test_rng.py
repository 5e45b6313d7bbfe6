"""Sampler law and determinism tests."""

import numpy as np
import pytest
from scipy import stats

from paris_rml.models import StochasticVolatilityModel
from paris_rml.rng import (BackwardSampleStats, RngStream, SamplerError,
                           backward_indices, categorical_draw,
                           draw_backward_indices)

SV = StochasticVolatilityModel()
THETA = np.array([0.8, 0.1, 1.0])


class ConstantKernelModel:
    """Transition density constant in both arguments (weights cancel)."""

    def __init__(self, level=0.25):
        self.level = level

    def transition_density(self, theta, x, x_next):
        return np.broadcast_to(self.level, np.broadcast_shapes(np.shape(x), np.shape(x_next)))

    def transition_logpdf(self, theta, x, x_next):
        return np.broadcast_to(np.log(self.level),
                               np.broadcast_shapes(np.shape(x), np.shape(x_next)))

    def transition_sup(self, theta):
        return self.level


class LyingSupModel(ConstantKernelModel):
    def transition_sup(self, theta):
        return self.level / 10.0


class TestRngStream:
    def test_same_key_same_draws(self):
        a = RngStream(7).child(1, 2).generator().random(8)
        b = RngStream(7).child(1, 2).generator().random(8)
        assert np.array_equal(a, b)

    def test_distinct_keys_distinct_draws(self):
        a = RngStream(7).child(1, 2).generator().random(8)
        b = RngStream(7).child(1, 3).generator().random(8)
        c = RngStream(8).child(1, 2).generator().random(8)
        assert not np.array_equal(a, b) and not np.array_equal(a, c)


class TestCategoricalDraw:
    def test_degenerate_mass(self):
        gen = RngStream(0).generator()
        draws = categorical_draw([0.0, 5.0, 0.0], gen, size=1000)
        assert np.all(draws == 1)

    def test_two_point_frequency(self):
        gen = RngStream(1).generator()
        n = 100_000
        draws = categorical_draw([1.0, 3.0], gen, size=n)
        freq = (draws == 1).mean()
        se = np.sqrt(0.75 * 0.25 / n)
        assert abs(freq - 0.75) < 3 * se

    def test_uniform_chi_square(self):
        gen = RngStream(2).generator()
        n = 100_000
        draws = categorical_draw([1.0, 1.0, 1.0, 1.0], gen, size=n)
        counts = np.bincount(draws, minlength=4)
        pvalue = stats.chisquare(counts).pvalue
        assert pvalue > 1e-3, f"chi-square p={pvalue}"

    @pytest.mark.parametrize("weights", [[0.0, 0.0], [1.0, -1.0], [np.nan, 1.0],
                                         [np.inf, 1.0], []])
    def test_invalid_weights(self, weights):
        with pytest.raises(SamplerError):
            categorical_draw(weights, RngStream(0).generator())


def sv_cloud(n, seed, y=0.4):
    gen = RngStream(seed).generator()
    positions = SV.initial_sample(THETA, n, gen)
    weights = np.asarray(SV.emission_density(THETA, positions, y))
    return positions, weights


def exact_backward_law(positions, weights, target):
    w = weights * np.asarray(SV.transition_density(THETA, positions, target))
    return w / w.sum()


class TestBackwardIndices:
    def test_single_support_point(self):
        gen = RngStream(3).generator()
        idx = backward_indices(np.array([0.2]), np.array([1.0]), 0.5, THETA, SV,
                               n_tilde=10, cap=64, rng=gen)
        assert idx.shape == (10,) and np.all(idx == 0)

    def test_constant_kernel_gives_weight_law(self):
        # Uniform weights + constant kernel: the law is uniform over indices.
        model = ConstantKernelModel()
        n = 20
        gen = RngStream(4).generator()
        idx = draw_backward_indices(np.zeros(n), np.full(n, 1.0 / n),
                                    np.zeros(200), None, model, 50, 64, gen)
        counts = np.bincount(idx.ravel(), minlength=n)
        pvalue = stats.chisquare(counts).pvalue
        assert pvalue > 1e-3, f"chi-square p={pvalue}"

    def test_law_matches_exact_weights_total_variation(self):
        positions, weights = sv_cloud(200, seed=5)
        target = 0.3
        exact = exact_backward_law(positions, weights, target)
        gen = RngStream(6).generator()
        idx = backward_indices(positions, weights, target, THETA, SV,
                               n_tilde=100_000, cap=64, rng=gen)
        emp = np.bincount(idx, minlength=200) / idx.size
        tv = 0.5 * np.abs(emp - exact).sum()
        assert tv < 0.02, f"TV={tv}"

    def test_accept_reject_and_fallback_same_law(self):
        positions, weights = sv_cloud(100, seed=7)
        target = -0.2
        draws = {}
        for cap in (64, 0):  # cap=0 forces the exact fallback branch
            gen = RngStream(8).generator()
            draws[cap] = backward_indices(positions, weights, target, THETA, SV,
                                          n_tilde=100_000, cap=cap, rng=gen)
        c1 = np.bincount(draws[64], minlength=100)
        c2 = np.bincount(draws[0], minlength=100)
        keep = (c1 + c2) >= 10  # merge sparse cells out of the statistic
        chi2 = np.sum((c1[keep] - c2[keep]) ** 2 / (c1[keep] + c2[keep]))
        pvalue = stats.chi2.sf(chi2, df=keep.sum() - 1)
        assert pvalue > 1e-3, f"two-sample chi-square p={pvalue}"

    def test_deterministic_given_stream(self):
        positions, weights = sv_cloud(50, seed=9)
        a = draw_backward_indices(positions, weights, positions[:10], THETA, SV,
                                  2, 64, RngStream(10).generator())
        b = draw_backward_indices(positions, weights, positions[:10], THETA, SV,
                                  2, 64, RngStream(10).generator())
        assert np.array_equal(a, b)

    def test_stats_recorded(self):
        positions, weights = sv_cloud(100, seed=11)
        tally = BackwardSampleStats()
        draw_backward_indices(positions, weights, positions, THETA, SV,
                              2, 64, RngStream(12).generator(), tally)
        assert tally.draws == 200
        assert tally.mean_proposals_per_draw >= 1.0
        assert 0.0 <= tally.fallback_fraction <= 1.0

    def test_sup_violation_detected(self):
        model = LyingSupModel()
        with pytest.raises(ValueError, match="sup"):
            draw_backward_indices(np.zeros(5), np.ones(5), np.zeros(3), None,
                                  model, 2, 64, RngStream(13).generator())

    def test_bad_inputs(self):
        with pytest.raises(SamplerError):
            draw_backward_indices(np.zeros(3), np.zeros(3), np.zeros(2), THETA, SV,
                                  2, 64, RngStream(14).generator())
        with pytest.raises(ValueError):
            draw_backward_indices(np.zeros(3), np.ones(3), np.zeros(2), THETA, SV,
                                  0, 64, RngStream(15).generator())
