"""State-space model definitions: densities, samplers, and score terms.

Two concrete models are provided, both scalar-state AR(1) models
parameterized by theta = (phi, sigma2, beta2):

* ``StochasticVolatilityModel`` -- X_{t+1} = phi X_t + sigma V_{t+1},
  Y_t = beta exp(X_t / 2) U_t, the estimation target.
* ``LinearGaussianModel``       -- same state equation with
  Y_t = c X_t + beta U_t, used purely as an exact-oracle vehicle
  (its likelihood and score have closed Kalman forms).

All densities are with respect to Lebesgue measure on the real line.
Every method is a pure function of its arguments and broadcasts over
numpy arrays, so vectorized and concurrent use is safe.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from . import rng as _rng

LOG_2PI = float(np.log(2.0 * np.pi))

DEFAULT_PARAM_FLOOR = 1e-4


class ModelError(ValueError):
    """Invalid parameters or inputs for a model operation."""


def _as_theta(theta) -> np.ndarray:
    th = np.asarray(theta, dtype=float)
    if th.shape != (3,):
        raise ModelError(f"theta must have 3 components (phi, sigma2, beta2), got shape {th.shape}")
    if not np.all(np.isfinite(th)):
        raise ModelError(f"theta must be finite, got {th}")
    return th


def _stack3(c0, c1, c2) -> np.ndarray:
    c0, c1, c2 = np.broadcast_arrays(c0, c1, c2)
    return np.stack([np.asarray(c0, float), np.asarray(c1, float), np.asarray(c2, float)], axis=-1)


@dataclass(frozen=True)
class ConstraintSet:
    """Componentwise box constraints for the parameter vector."""

    lower: np.ndarray
    upper: np.ndarray

    def project(self, theta) -> np.ndarray:
        """Clamp theta onto the box; idempotent and total on finite inputs."""
        th = _as_theta(theta)
        return np.clip(th, self.lower, self.upper)

    def contains(self, theta) -> bool:
        th = np.asarray(theta, dtype=float)
        return bool(np.all(th >= self.lower) and np.all(th <= self.upper))


def default_constraints(floor: float = DEFAULT_PARAM_FLOOR) -> ConstraintSet:
    """Defaults for the (phi, sigma2, beta2) family: |phi| <= 1 - floor,
    variances >= floor."""
    if not 0 < floor < 1:
        raise ModelError(f"constraint floor must be in (0, 1), got {floor}")
    return ConstraintSet(
        lower=np.array([-1.0 + floor, floor, floor]),
        upper=np.array([1.0 - floor, np.inf, np.inf]),
    )


def project(theta, constraints: ConstraintSet) -> np.ndarray:
    """Project a finite parameter vector onto a constraint set."""
    return constraints.project(theta)


class GaussianAr1Model:
    """Common AR(1) state dynamics: X_{t+1} = phi X_t + sigma V_{t+1}.

    The initial law is the stationary N(0, sigma2 / (1 - phi^2)); it is
    treated as parameter-free by the estimation algorithms (evaluated once
    at the starting parameter, contributing no score term).
    """

    name = "ar1"
    dim_theta = 3

    def validate_theta(self, theta) -> np.ndarray:
        th = _as_theta(theta)
        phi, sigma2, beta2 = th
        if abs(phi) >= 1.0:
            raise ModelError(f"|phi| must be < 1, got {phi}")
        if sigma2 <= 0 or beta2 <= 0:
            raise ModelError(f"variances must be positive, got sigma2={sigma2}, beta2={beta2}")
        return th

    def constraints(self, floor: float = DEFAULT_PARAM_FLOOR) -> ConstraintSet:
        return default_constraints(floor)

    def stationary_variance(self, theta) -> float:
        phi, sigma2, _ = self.validate_theta(theta)
        return sigma2 / (1.0 - phi * phi)

    def initial_sample(self, theta, n, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(0.0, np.sqrt(self.stationary_variance(theta)), size=n)

    def transition_sample(self, theta, x, rng: np.random.Generator) -> np.ndarray:
        phi, sigma2, _ = theta
        x = np.asarray(x, dtype=float)
        return phi * x + np.sqrt(sigma2) * rng.standard_normal(x.shape)

    def transition_density(self, theta, x, x_next):
        phi, sigma2, _ = theta
        r = np.asarray(x_next, float) - phi * np.asarray(x, float)
        return np.exp(-r * r / (2.0 * sigma2)) / np.sqrt(2.0 * np.pi * sigma2)

    def transition_logpdf(self, theta, x, x_next):
        phi, sigma2, _ = theta
        r = np.asarray(x_next, float) - phi * np.asarray(x, float)
        return -r * r / (2.0 * sigma2) - 0.5 * (LOG_2PI + np.log(sigma2))

    def transition_sup(self, theta) -> float:
        # The Gaussian kernel is maximal at zero residual, for any (x, x').
        _, sigma2, _ = theta
        if sigma2 <= 0:
            raise ModelError(f"sigma2 must be positive, got {sigma2}")
        return 1.0 / np.sqrt(2.0 * np.pi * sigma2)

    def grad_log_transition(self, theta, x, x_next):
        phi, sigma2, _ = theta
        if sigma2 <= 0:
            raise ModelError(f"sigma2 must be positive, got {sigma2}")
        x = np.asarray(x, float)
        r = np.asarray(x_next, float) - phi * x
        return _stack3(
            x * r / sigma2,
            -0.5 / sigma2 + r * r / (2.0 * sigma2 * sigma2),
            np.zeros_like(r),
        )

    def grad_emission(self, theta, x, y):
        # Chain rule: grad g = g * grad log g.
        g = np.asarray(self.emission_density(theta, x, y))
        return g[..., None] * self.grad_log_emission(theta, x, y)

    def _simulate_states(self, theta, n_steps, rng: np.random.Generator) -> np.ndarray:
        phi, sigma2, _ = self.validate_theta(theta)
        x0 = rng.normal(0.0, np.sqrt(self.stationary_variance(theta)))
        x = np.empty(n_steps + 1)
        x[0] = x0
        if n_steps > 0:
            noise = np.sqrt(sigma2) * rng.standard_normal(n_steps)
            x[1:] = lfilter([1.0], [1.0, -phi], noise, zi=np.array([phi * x0]))[0]
        return x

    def simulate(self, theta, n_steps, seed):
        """Draw (states, observations), both of length ``n_steps + 1``.

        Uses two independent noise streams (state and observation) derived
        from ``seed``, so the same seed always reproduces the same arrays.
        """
        if n_steps < 0:
            raise ModelError(f"n_steps must be >= 0, got {n_steps}")
        rng_state = _rng.RngStream(seed).child(_rng.SIM_STATE).generator()
        rng_obs = _rng.RngStream(seed).child(_rng.SIM_OBS).generator()
        states = self._simulate_states(theta, n_steps, rng_state)
        obs = self._emission_sample(theta, states, rng_obs)
        return states, obs


class StochasticVolatilityModel(GaussianAr1Model):
    """Stochastic volatility: Y_t = beta exp(X_t / 2) U_t, U_t iid N(0, 1)."""

    name = "sv"

    def emission_density(self, theta, x, y):
        _, _, beta2 = theta
        v = beta2 * np.exp(np.asarray(x, float))
        y = np.asarray(y, float)
        # An extreme observation underflows the density to exactly 0; the
        # overflow in the intermediate ratio is the intended limit.
        with np.errstate(over="ignore"):
            return np.exp(-y * y / (2.0 * v)) / np.sqrt(2.0 * np.pi * v)

    def emission_logpdf(self, theta, x, y):
        _, _, beta2 = theta
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        v = beta2 * np.exp(x)
        with np.errstate(over="ignore"):
            return -y * y / (2.0 * v) - 0.5 * (LOG_2PI + np.log(beta2) + x)

    def grad_log_emission(self, theta, x, y):
        _, _, beta2 = theta
        if beta2 <= 0:
            raise ModelError(f"beta2 must be positive, got {beta2}")
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        ex = np.exp(x)
        comp2 = -0.5 / beta2 + y * y / (2.0 * beta2 * beta2 * ex)
        return _stack3(np.zeros_like(comp2), np.zeros_like(comp2), comp2)

    def _emission_sample(self, theta, x, rng: np.random.Generator) -> np.ndarray:
        _, _, beta2 = theta
        return np.sqrt(beta2) * np.exp(np.asarray(x, float) / 2.0) * rng.standard_normal(np.shape(x))


class LinearGaussianModel(GaussianAr1Model):
    """Linear-Gaussian observations: Y_t = c X_t + beta U_t, U_t iid N(0, 1).

    The observation coefficient c is a fixed model constant, not part of
    theta, so the parameter space matches the stochastic volatility model
    and the same estimation configuration runs unchanged.
    """

    name = "lgssm"

    def __init__(self, obs_coeff: float = 1.0):
        if not np.isfinite(obs_coeff):
            raise ModelError(f"obs_coeff must be finite, got {obs_coeff}")
        self.obs_coeff = float(obs_coeff)

    def emission_density(self, theta, x, y):
        _, _, beta2 = theta
        r = np.asarray(y, float) - self.obs_coeff * np.asarray(x, float)
        return np.exp(-r * r / (2.0 * beta2)) / np.sqrt(2.0 * np.pi * beta2)

    def emission_logpdf(self, theta, x, y):
        _, _, beta2 = theta
        r = np.asarray(y, float) - self.obs_coeff * np.asarray(x, float)
        return -r * r / (2.0 * beta2) - 0.5 * (LOG_2PI + np.log(beta2))

    def grad_log_emission(self, theta, x, y):
        _, _, beta2 = theta
        if beta2 <= 0:
            raise ModelError(f"beta2 must be positive, got {beta2}")
        r = np.asarray(y, float) - self.obs_coeff * np.asarray(x, float)
        comp2 = -0.5 / beta2 + r * r / (2.0 * beta2 * beta2)
        return _stack3(np.zeros_like(comp2), np.zeros_like(comp2), comp2)

    def _emission_sample(self, theta, x, rng: np.random.Generator) -> np.ndarray:
        _, _, beta2 = theta
        x = np.asarray(x, float)
        return self.obs_coeff * x + np.sqrt(beta2) * rng.standard_normal(x.shape)


def additive_score_term(model, theta, x, x_next, y, include_transition: bool = True):
    """Per-transition score summand s(x, x', y) = grad log g(x, y) [+ grad log q(x, x')].

    The transition gradient belongs in every summand, including the first
    one; ``include_transition=False`` reproduces a published variant that
    omits it at time zero (see the engine's fidelity flag).
    """
    s = model.grad_log_emission(theta, x, y)
    if include_transition:
        s = s + model.grad_log_transition(theta, x, x_next)
    pair_shape = np.broadcast_shapes(np.shape(x), np.shape(x_next))
    if s.shape[:-1] != pair_shape:
        s = np.broadcast_to(s, pair_shape + (s.shape[-1],))
    return s


def sv_simulate(theta_star, n_steps, seed):
    """Simulate the stochastic volatility model; returns (states, observations)."""
    return StochasticVolatilityModel().simulate(theta_star, n_steps, seed)


_MODELS = {
    "sv": StochasticVolatilityModel,
    "lgssm": LinearGaussianModel,
}


def get_model(model_id: str, **kwargs):
    """Look up a model by its string identifier ('sv' or 'lgssm')."""
    try:
        cls = _MODELS[model_id]
    except KeyError:
        raise ModelError(
            f"unknown model id {model_id!r}; expected one of {sorted(_MODELS)}") from None
    return cls(**kwargs)
