"""Model-layer tests: gradients against finite differences, samplers, projection."""

import numpy as np
import pytest

from paris_rml.models import (DEFAULT_PARAM_FLOOR, ModelError,
                              StochasticVolatilityModel, default_constraints,
                              get_model, project, sv_simulate)

SV = StochasticVolatilityModel()
THETA = np.array([0.8, 0.1, 1.0])


def fd_grad_theta(f, theta, h=1e-6):
    """Central finite differences of a scalar function of theta."""
    out = np.empty(3)
    for j in range(3):
        plus, minus = np.array(theta, float), np.array(theta, float)
        plus[j] += h
        minus[j] -= h
        out[j] = (f(plus) - f(minus)) / (2.0 * h)
    return out


def rel_err(a, b, floor=1e-3):
    return np.abs(np.asarray(a) - np.asarray(b)) / np.maximum(np.abs(b), floor)


class TestGradLogTransition:
    def test_zero_residual(self):
        g = SV.grad_log_transition(THETA, 0.3, 0.8 * 0.3)
        assert g[0] == 0.0
        assert g[1] == pytest.approx(-1.0 / (2 * 0.1))
        assert g[2] == 0.0

    def test_x_zero_kills_phi_component(self):
        for x_next in (-2.0, 0.0, 1.7):
            assert SV.grad_log_transition(THETA, 0.0, x_next)[0] == 0.0

    def test_matches_finite_differences_at_reference_point(self):
        x, x_next = 0.2, 0.1
        fd = fd_grad_theta(lambda th: float(SV.transition_logpdf(th, x, x_next)), THETA)
        analytic = SV.grad_log_transition(THETA, x, x_next)
        assert rel_err(analytic, fd).max() < 1e-5

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_finite_differences_randomized(self, seed):
        gen = np.random.default_rng(seed)
        for model in (SV, get_model("lgssm", obs_coeff=1.3)):
            for _ in range(25):
                theta = np.array([gen.uniform(-0.9, 0.9), gen.uniform(0.05, 2.0),
                                  gen.uniform(0.2, 3.0)])
                x, x_next = gen.normal(0, 1.2, size=2)
                fd = fd_grad_theta(
                    lambda th: float(model.transition_logpdf(th, x, x_next)), theta)
                analytic = model.grad_log_transition(theta, x, x_next)
                assert rel_err(analytic, fd).max() < 1e-4, \
                    f"seed={seed} model={model.name} theta={theta} x={x} x'={x_next}"

    def test_domain_error(self):
        with pytest.raises(ModelError):
            SV.grad_log_transition(np.array([0.5, -0.1, 1.0]), 0.0, 0.0)


class TestGradLogEmission:
    def test_one_sigma_residual_cancels(self):
        # y^2 = beta2 * exp(x) makes the two terms cancel exactly.
        x = 0.4
        y = np.sqrt(1.0 * np.exp(x))
        assert SV.grad_log_emission(THETA, x, y)[2] == pytest.approx(0.0, abs=1e-15)

    def test_y_zero(self):
        g = SV.grad_log_emission(THETA, 0.7, 0.0)
        assert g[2] == pytest.approx(-0.5)
        assert g[0] == 0.0 and g[1] == 0.0

    def test_matches_finite_differences_at_reference_point(self):
        x, y = 0.5, 1.2
        fd = fd_grad_theta(lambda th: float(SV.emission_logpdf(th, x, y)), THETA)
        analytic = SV.grad_log_emission(THETA, x, y)
        assert rel_err(analytic, fd).max() < 1e-5

    @pytest.mark.parametrize("seed", [3, 4])
    def test_matches_finite_differences_randomized(self, seed):
        gen = np.random.default_rng(seed)
        for model in (SV, get_model("lgssm", obs_coeff=0.7)):
            for _ in range(25):
                theta = np.array([gen.uniform(-0.9, 0.9), gen.uniform(0.05, 2.0),
                                  gen.uniform(0.2, 3.0)])
                x, y = gen.normal(0, 1.2), gen.normal(0, 1.5)
                fd = fd_grad_theta(lambda th: float(model.emission_logpdf(th, x, y)), theta)
                analytic = model.grad_log_emission(theta, x, y)
                assert rel_err(analytic, fd).max() < 1e-4, \
                    f"seed={seed} model={model.name} theta={theta} x={x} y={y}"

    def test_domain_error(self):
        with pytest.raises(ModelError):
            SV.grad_log_emission(np.array([0.5, 0.1, 0.0]), 0.0, 1.0)


class TestChainRuleAndSup:
    def test_grad_emission_chain_rule(self):
        gen = np.random.default_rng(11)
        for model in (SV, get_model("lgssm")):
            x = gen.normal(0, 1, 100)
            y = 0.3
            ge = model.grad_emission(THETA, x, y)
            ref = np.asarray(model.emission_density(THETA, x, y))[:, None] \
                * model.grad_log_emission(THETA, x, y)
            np.testing.assert_allclose(ge, ref, rtol=0, atol=1e-15)

    def test_transition_sup_closed_form(self):
        for sigma2 in (0.1, 1.0, 3.7):
            theta = np.array([0.5, sigma2, 1.0])
            assert SV.transition_sup(theta) == pytest.approx(1.0 / np.sqrt(2 * np.pi * sigma2))

    def test_transition_sup_dominates(self):
        gen = np.random.default_rng(12)
        x = gen.normal(0, 2, 10_000)
        x_next = gen.normal(0, 2, 10_000)
        for theta in ([0.8, 0.1, 1.0], [0.0, 1.0, 1.0], [-0.95, 0.4, 2.0]):
            q = SV.transition_density(np.asarray(theta), x, x_next)
            assert np.all(q <= SV.transition_sup(np.asarray(theta)))


class TestSimulate:
    def test_lengths_and_finiteness(self):
        for n_steps in (0, 1, 17):
            xs, ys = sv_simulate(THETA, n_steps, seed=1)
            assert xs.shape == (n_steps + 1,) and ys.shape == (n_steps + 1,)
            assert np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))

    def test_stationary_variance(self):
        xs, _ = sv_simulate(THETA, 100_000, seed=2)
        target = 0.1 / (1 - 0.64)
        assert abs(xs.var() - target) / target < 0.05

    def test_iid_degenerate_case(self):
        xs, ys = sv_simulate([0.0, 1.0, 1.0], 0, seed=3)
        assert xs.shape == (1,) and ys.shape == (1,)

    def test_deterministic(self):
        a = sv_simulate(THETA, 500, seed=9)
        b = sv_simulate(THETA, 500, seed=9)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        c = sv_simulate(THETA, 500, seed=10)
        assert not np.array_equal(a[1], c[1])

    def test_rejects_bad_parameters(self):
        with pytest.raises(ModelError):
            sv_simulate([1.0, 0.1, 1.0], 10, seed=0)
        with pytest.raises(ModelError):
            sv_simulate([0.5, 0.1, np.nan], 10, seed=0)
        with pytest.raises(ModelError):
            sv_simulate(THETA, -1, seed=0)


class TestProjection:
    def test_interior_point_unchanged(self):
        c = default_constraints()
        np.testing.assert_array_equal(project(THETA, c), THETA)

    def test_clamps(self):
        c = default_constraints(DEFAULT_PARAM_FLOOR)
        np.testing.assert_allclose(project([1.5, 0.1, 1.0], c), [0.9999, 0.1, 1.0])
        np.testing.assert_allclose(project([0.5, -0.2, 1.0], c), [0.5, 1e-4, 1.0])

    def test_idempotent(self):
        gen = np.random.default_rng(13)
        c = default_constraints()
        for _ in range(100):
            theta = gen.normal(0, 5, 3)
            once = project(theta, c)
            np.testing.assert_array_equal(project(once, c), once)
            assert c.contains(once)

    def test_bad_floor(self):
        with pytest.raises(ModelError):
            default_constraints(0.0)


def test_get_model_unknown_id():
    with pytest.raises(ModelError, match="unknown model"):
        get_model("arma")
