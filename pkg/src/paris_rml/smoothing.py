"""Per-particle tangent-filter statistics and their forward updates.

Each particle i carries a vector tau_i approximating the conditional
expectation, given the particle's current position and the observations
so far, of the accumulated score summands along the latent path.  Two
updates are provided:

* ``paris_update``     -- Monte Carlo average over a small number of
  backward-index draws per particle; expected cost O(N * n_tilde).
* ``quadratic_update`` -- the exact self-normalized sum over all source
  particles; cost Theta(N^2).  Conditionally on the clouds it equals the
  expectation of ``paris_update``, which makes it the natural oracle for
  the sampled version (and the classical baseline algorithm).

``genealogy_update`` propagates the statistics along resampling ancestor
lines only; it is the degenerate control used by stability probes.
"""

from dataclasses import dataclass

import numpy as np

from .filtering import DegeneracyError, ParticleCloud
from .models import additive_score_term
from .rng import DEFAULT_REJECTION_CAP, BackwardSampleStats, draw_backward_indices


@dataclass(frozen=True)
class TauStats:
    """N tangent-statistic vectors aligned with a particle cloud."""

    tau: np.ndarray  # (N, d)
    t: int

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        if tau.ndim != 2:
            raise ValueError(f"tau must be an (N, d) matrix, got shape {tau.shape}")
        if not np.all(np.isfinite(tau)):
            raise ValueError(f"non-finite tau entries at t={self.t}")
        object.__setattr__(self, "tau", tau)

    @property
    def n(self) -> int:
        return self.tau.shape[0]

    @property
    def dim(self) -> int:
        return self.tau.shape[1]


def zero_stats(n: int, dim: int, t: int = 0) -> TauStats:
    """The t = 0 initialization: every statistic is exactly zero."""
    return TauStats(tau=np.zeros((n, dim)), t=t)


def tau_mean(stats: TauStats) -> np.ndarray:
    """Arithmetic mean vector of the per-particle statistics."""
    return stats.tau.mean(axis=0)


def _check_alignment(stats: TauStats, prev_cloud: ParticleCloud, next_cloud: ParticleCloud):
    if stats.t != prev_cloud.t or next_cloud.t != prev_cloud.t + 1:
        raise ValueError(
            f"misaligned inputs: tau.t={stats.t}, prev.t={prev_cloud.t}, next.t={next_cloud.t}")
    if stats.n != prev_cloud.n:
        raise ValueError("tau and source cloud must have the same particle count")


def _check_finite(new_tau: np.ndarray, t: int):
    if not np.all(np.isfinite(new_tau)):
        bad = int(np.flatnonzero(~np.isfinite(new_tau).all(axis=1))[0])
        raise ValueError(
            f"non-finite score summand while updating tau at t={t}, particle i={bad}")


def paris_update(stats: TauStats, prev_cloud: ParticleCloud, next_cloud: ParticleCloud,
                 y, theta, model, n_tilde: int, rng: np.random.Generator,
                 cap: int = DEFAULT_REJECTION_CAP, include_transition: bool = True,
                 sampler_stats: BackwardSampleStats | None = None) -> TauStats:
    """Sampled tangent update: average over n_tilde backward draws per particle.

    ``y`` is the observation at the source cloud's time index (it enters
    the score summand), and ``rng`` supplies all index draws.
    """
    _check_alignment(stats, prev_cloud, next_cloud)
    idx = draw_backward_indices(prev_cloud.positions, prev_cloud.weights,
                                next_cloud.positions, theta, model,
                                n_tilde, cap, rng, sampler_stats)
    summand = additive_score_term(model, theta,
                                  prev_cloud.positions[idx],
                                  next_cloud.positions[:, None],
                                  y, include_transition)
    new_tau = (stats.tau[idx] + summand).mean(axis=1)
    _check_finite(new_tau, prev_cloud.t)
    return TauStats(tau=new_tau, t=next_cloud.t)


def _target_block(n: int) -> int:
    # Keep pairwise work under ~2e6 entries per chunk to bound memory.
    return max(1, int(2_000_000 // max(n, 1)))


def quadratic_update(stats: TauStats, prev_cloud: ParticleCloud, next_cloud: ParticleCloud,
                     y, theta, model, include_transition: bool = True) -> TauStats:
    """Exact tangent update: self-normalized sum over all source particles.

    Backward-kernel rows are normalized in log scale, so the result is
    well defined whenever any source particle has nonzero backward weight
    in exact arithmetic; a genuinely all-zero row raises DegeneracyError.
    """
    _check_alignment(stats, prev_cloud, next_cloud)
    src = prev_cloud.positions
    n = prev_cloud.n
    with np.errstate(divide="ignore"):
        log_w = np.log(prev_cloud.weights)

    # Target-independent part of the summand (the emission gradient).
    base = stats.tau + model.grad_log_emission(theta, src, y)

    new_tau = np.empty((next_cloud.n, stats.dim))
    block = _target_block(n)
    for start in range(0, next_cloud.n, block):
        tgt = next_cloud.positions[start:start + block]
        log_rows = log_w[None, :] + np.asarray(
            model.transition_logpdf(theta, src[None, :], tgt[:, None]))
        row_max = log_rows.max(axis=1)
        dead = ~np.isfinite(row_max)
        if np.any(dead):
            raise DegeneracyError(
                prev_cloud.t,
                f"zero backward normalizer for target particle i={start + int(np.flatnonzero(dead)[0])}")
        weights = np.exp(log_rows - row_max[:, None])
        weights /= weights.sum(axis=1, keepdims=True)
        out = weights @ base
        if include_transition:
            glt = model.grad_log_transition(theta, src[None, :], tgt[:, None])
            out = out + np.einsum("bn,bnc->bc", weights, glt)
        new_tau[start:start + block] = out

    _check_finite(new_tau, prev_cloud.t)
    return TauStats(tau=new_tau, t=next_cloud.t)


def genealogy_update(stats: TauStats, ancestors, prev_cloud: ParticleCloud,
                     next_cloud: ParticleCloud, y, theta, model,
                     include_transition: bool = True) -> TauStats:
    """Ancestor-line tangent update (path-degenerate control, no backward draws)."""
    _check_alignment(stats, prev_cloud, next_cloud)
    anc = np.asarray(ancestors)
    summand = additive_score_term(model, theta, prev_cloud.positions[anc],
                                  next_cloud.positions, y, include_transition)
    new_tau = stats.tau[anc] + summand
    _check_finite(new_tau, prev_cloud.t)
    return TauStats(tau=new_tau, t=next_cloud.t)
