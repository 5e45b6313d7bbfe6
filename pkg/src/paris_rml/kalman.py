"""Exact filtering, log-likelihood, and score for the linear-Gaussian model.

The model is X_{t+1} = phi X_t + sigma V_{t+1}, Y_t = c X_t + beta U_t
with stationary initialization.  Besides the standard predictive-moment
recursion, the filter state carries the sensitivities of the predictive
mean and variance with respect to theta = (phi, sigma2, beta2), which
yields the exact per-step score

    d/dtheta log p(y_t | y_{0:t-1})

by direct differentiation of the innovation log-density.  A central
finite-difference path over the log-likelihood provides a second,
independent oracle for cross-checking.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LgssmSpec",
    "KalmanState",
    "initial_state",
    "kalman_step",
    "kalman_score_step",
    "kalman_filter",
    "fd_score",
]


@dataclass(frozen=True)
class LgssmSpec:
    """Linear-Gaussian model constants; obs_coeff is fixed, not estimated."""

    phi: float
    sigma2: float
    beta2: float
    obs_coeff: float = 1.0

    def __post_init__(self):
        vals = (self.phi, self.sigma2, self.beta2, self.obs_coeff)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"spec fields must be finite, got {vals}")
        if abs(self.phi) >= 1.0:
            raise ValueError(f"|phi| must be < 1 for stationary initialization, got {self.phi}")
        if self.sigma2 <= 0 or self.beta2 <= 0:
            raise ValueError(
                f"variances must be positive, got sigma2={self.sigma2}, beta2={self.beta2}")

    @classmethod
    def from_theta(cls, theta, obs_coeff: float = 1.0) -> "LgssmSpec":
        phi, sigma2, beta2 = np.asarray(theta, dtype=float)
        return cls(phi=phi, sigma2=sigma2, beta2=beta2, obs_coeff=obs_coeff)

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.phi, self.sigma2, self.beta2])


@dataclass(frozen=True)
class KalmanState:
    """Predictive mean/variance and their theta-sensitivities."""

    mean: float
    var: float
    dmean: np.ndarray  # (3,) sensitivities of the predictive mean
    dvar: np.ndarray   # (3,) sensitivities of the predictive variance

    def __post_init__(self):
        if not self.var > 0:
            raise ValueError(f"predictive variance must be positive, got {self.var}")


def initial_state(spec: LgssmSpec) -> KalmanState:
    """Stationary initialization m = 0, P = sigma2 / (1 - phi^2), with sensitivities."""
    denom = 1.0 - spec.phi * spec.phi
    return KalmanState(
        mean=0.0,
        var=spec.sigma2 / denom,
        dmean=np.zeros(3),
        dvar=np.array([2.0 * spec.phi * spec.sigma2 / denom**2, 1.0 / denom, 0.0]),
    )


def _step(state: KalmanState, y: float, spec: LgssmSpec):
    c = spec.obs_coeff
    m, P, dm, dP = state.mean, state.var, state.dmean, state.dvar

    innov_var = c * c * P + spec.beta2
    if not innov_var > 0:
        raise ValueError(f"non-positive innovation variance {innov_var}")
    d_innov_var = c * c * dP + np.array([0.0, 0.0, 1.0])
    innov = y - c * m
    d_innov = -c * dm

    ll = -0.5 * np.log(2.0 * np.pi * innov_var) - innov * innov / (2.0 * innov_var)
    score = (-d_innov_var / (2.0 * innov_var)
             - innov * d_innov / innov_var
             + innov * innov * d_innov_var / (2.0 * innov_var * innov_var))

    gain = c * P / innov_var
    d_gain = c * (dP * innov_var - P * d_innov_var) / (innov_var * innov_var)
    m_filt = m + gain * innov
    dm_filt = dm + d_gain * innov + gain * d_innov
    p_filt = P - gain * c * P
    dp_filt = dP - d_gain * c * P - gain * c * dP

    new = KalmanState(
        mean=spec.phi * m_filt,
        var=spec.phi * spec.phi * p_filt + spec.sigma2,
        dmean=spec.phi * dm_filt + np.array([m_filt, 0.0, 0.0]),
        dvar=spec.phi * spec.phi * dp_filt + np.array([2.0 * spec.phi * p_filt, 1.0, 0.0]),
    )
    return new, float(ll), score


def kalman_step(state: KalmanState, y: float, spec: LgssmSpec):
    """One predict/update sweep; returns (new state, log-likelihood increment)."""
    new, ll, _ = _step(state, y, spec)
    return new, ll


def kalman_score_step(state: KalmanState, y: float, spec: LgssmSpec):
    """One sweep of the differentiated recursion; returns (new state, score increment)."""
    new, _, score = _step(state, y, spec)
    return new, score


def kalman_filter(spec: LgssmSpec, observations):
    """Run the full recursion; returns (loglik increments, score increments).

    Row t of the score array is the exact gradient of
    log p(y_t | y_{0:t-1}) at the spec's parameters.
    """
    ys = np.asarray(observations, dtype=float)
    state = initial_state(spec)
    lls = np.empty(ys.size)
    scores = np.empty((ys.size, 3))
    for t, y in enumerate(ys):
        state, lls[t], scores[t] = _step(state, float(y), spec)
    return lls, scores


def total_loglik(spec: LgssmSpec, observations) -> float:
    """Sum of the log-likelihood increments over the whole record."""
    lls, _ = kalman_filter(spec, observations)
    return float(lls.sum())


def fd_score(spec: LgssmSpec, observations, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the total log-likelihood in theta.

    Independent of the sensitivity recursion: each evaluation reruns the
    plain filter at a perturbed spec (including its stationary
    initialization).  Raises if h is nonpositive or a perturbed spec
    leaves the admissible domain.
    """
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    theta = spec.theta
    out = np.empty(3)
    for j in range(3):
        plus, minus = theta.copy(), theta.copy()
        plus[j] += h
        minus[j] -= h
        out[j] = (total_loglik(LgssmSpec.from_theta(plus, spec.obs_coeff), observations)
                  - total_loglik(LgssmSpec.from_theta(minus, spec.obs_coeff), observations)
                  ) / (2.0 * h)
    return out
