"""Bootstrap particle filter for the one-step prediction flow.

The cloud convention follows the prediction-filter target: freshly
propagated particles carry uniform weights, and weighting with the
emission density happens at the start of the next step.  Resampling is
multinomial at every step.
"""

from dataclasses import dataclass, replace

import numpy as np

from .rng import categorical_draw


class DegeneracyError(RuntimeError):
    """Total weight (or a normalizer) underflowed to zero.

    Carries the time index and a human-readable reason so the driver can
    apply its skip policy instead of propagating NaNs.
    """

    def __init__(self, t, reason, partial=None):
        super().__init__(f"degeneracy at t={t}: {reason}")
        self.t = t
        self.reason = reason
        self.partial = partial


@dataclass(frozen=True)
class ParticleCloud:
    """N particle positions with weights and a time index."""

    positions: np.ndarray
    weights: np.ndarray
    t: int

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pos.ndim != 1 or pos.size == 0:
            raise ValueError("positions must be a nonempty 1-d array")
        if w.shape != pos.shape:
            raise ValueError("weights must match positions in shape")
        if not np.all(np.isfinite(pos)):
            raise ValueError(f"non-finite particle positions at t={self.t}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError(f"weights must be finite and nonnegative at t={self.t}")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.positions.size

    def normalized_weights(self) -> np.ndarray:
        total = self.weights.sum()
        if total <= 0:
            raise DegeneracyError(self.t, "all particle weights are zero")
        return self.weights / total


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def effective_sample_size(weights) -> float:
    """1 / sum(normalized weights squared); equals N for uniform weights."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        return 0.0
    w = w / total
    return float(1.0 / np.sum(w * w))


def init_cloud(model, theta0, n: int, rng: np.random.Generator) -> ParticleCloud:
    """N i.i.d. draws from the initial law, uniform weights, t = 0."""
    if n < 1:
        raise ValueError(f"particle count must be >= 1, got {n}")
    theta0 = model.validate_theta(theta0)
    positions = model.initial_sample(theta0, n, rng)
    return ParticleCloud(positions=positions, weights=uniform_weights(n), t=0)


def weight_cloud(cloud: ParticleCloud, y, theta, model) -> ParticleCloud:
    """Replace weights by emission densities g_theta(x_i, y); positions unchanged."""
    w = np.asarray(model.emission_density(theta, cloud.positions, y), dtype=float)
    if w.sum() == 0.0:
        raise DegeneracyError(cloud.t, f"emission weights underflowed for y={y!r}")
    return replace(cloud, weights=w)


def propagate(cloud: ParticleCloud, theta, model, rng: np.random.Generator):
    """Multinomial resample then move every particle through the transition kernel.

    Returns the new uniform-weight cloud at t + 1 and the ancestor indices
    (for diagnostics and genealogy baselines).
    """
    ancestors = categorical_draw(cloud.weights, rng, size=cloud.n)
    positions = model.transition_sample(theta, cloud.positions[ancestors], rng)
    if not np.all(np.isfinite(positions)):
        raise ValueError(f"transition kernel produced non-finite positions at t={cloud.t}")
    new_cloud = ParticleCloud(positions=positions,
                              weights=uniform_weights(cloud.n),
                              t=cloud.t + 1)
    return new_cloud, ancestors


def predict_estimate(cloud: ParticleCloud, f) -> float:
    """Arithmetic mean of f over a uniform-weight (prediction) cloud."""
    if not np.allclose(cloud.weights, 1.0 / cloud.n):
        raise ValueError("predict_estimate requires a uniform-weight cloud")
    return float(np.mean(f(cloud.positions)))
