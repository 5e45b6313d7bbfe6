"""Deterministic, keyed randomness and the categorical samplers.

Every random draw in the library comes from a counter-based (Philox)
generator keyed by ``(seed, purpose, t, ...)``.  Identical keys give
identical draw sequences on every platform and under any scheduling of
the surrounding work; distinct keys give statistically independent
streams, so per-step or per-replicate work can run in any order or in
parallel without sharing mutable state.
"""

from dataclasses import dataclass

import numpy as np

# Purpose tags used to key substreams.  Values are part of the
# reproducibility contract: changing them changes every output.
INIT_CLOUD = 0
PROPAGATE = 1
BACKWARD = 2
SIM_STATE = 3
SIM_OBS = 4
THETA0 = 5
REPLICATE = 6

__all__ = [
    "RngStream",
    "SamplerError",
    "categorical_draw",
    "draw_backward_indices",
    "backward_indices",
    "BackwardSampleStats",
    "replicate_seed",
]


class SamplerError(ValueError):
    """Raised when a categorical sampler is handed an unusable weight vector."""


@dataclass(frozen=True)
class RngStream:
    """A named random stream: a base seed plus a tuple of integer tags.

    The stream itself is stateless; :meth:`generator` materializes a live
    ``numpy.random.Generator`` positioned at the start of the stream.  Use
    :meth:`child` to derive independent substreams.
    """

    seed: int
    key: tuple = ()

    def child(self, *tags: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(int(t) for t in tags))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))


def replicate_seed(base_seed: int, replicate: int) -> int:
    """Derive the 64-bit seed for one replicate from an experiment seed."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(REPLICATE, int(replicate)))
    return int(ss.generate_state(1, np.uint64)[0])


def _validate_weights(weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise SamplerError("weights must be a nonempty 1-d vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise SamplerError("weights must be finite and nonnegative")
    if not np.any(w > 0):
        raise SamplerError("all weights are zero")
    return w


def categorical_draw(weights, rng: np.random.Generator, size=None):
    """Draw indices i with probability ``weights[i] / sum(weights)``.

    Inverse-CDF over the running sum of the (unnormalized) weights.
    Returns a scalar index when ``size`` is None, else an array of shape
    ``size``.  Indices are 0-based.
    """
    w = _validate_weights(weights)
    cum = np.cumsum(w)
    u = rng.random(size=size) * cum[-1]
    # side="right" never selects a zero-weight atom; the clip guards the
    # measure-zero event u rounding up to the total.
    return np.minimum(np.searchsorted(cum, u, side="right"), w.size - 1)


@dataclass
class BackwardSampleStats:
    """Tallies for the accept-reject backward sampler."""

    draws: int = 0
    proposals: int = 0
    fallbacks: int = 0

    def merge(self, other: "BackwardSampleStats") -> None:
        self.draws += other.draws
        self.proposals += other.proposals
        self.fallbacks += other.fallbacks

    @property
    def mean_proposals_per_draw(self) -> float:
        return self.proposals / self.draws if self.draws else 0.0

    @property
    def fallback_fraction(self) -> float:
        return self.fallbacks / self.draws if self.draws else 0.0


# Proposal rounds grow geometrically so that the common case (acceptance
# within a handful of proposals) touches small arrays only, while slow
# acceptors get their budget in a few large vectorized rounds.
_ROUND_WIDTHS = (4, 8, 16)

# Proposals per draw before the exact O(N) fallback.  Large enough that
# the fallback stays rare (slow acceptors typically accept within a few
# dozen proposals); the realized law is exact for any value.
DEFAULT_REJECTION_CAP = 64


def draw_backward_indices(positions, weights, targets, theta, model, n_tilde,
                          cap, rng: np.random.Generator,
                          stats: BackwardSampleStats | None = None):
    """Draw backward indices for every target particle.

    For each target x' and each of the ``n_tilde`` slots, draws an index J
    from the categorical law with unnormalized weights
    ``weights[l] * q_theta(positions[l], x')``.  Sampling is by
    accept-reject: propose L from the filter weights and accept with
    probability ``q_theta(positions[L], x') / sup q_theta``.  A draw that
    rejects ``cap`` consecutive proposals falls back to an exact
    inverse-CDF draw over the full weight row (an O(N) scan).  Both
    branches realize exactly the target law.

    Args:
        positions: particle positions at the earlier time, shape (N,).
        weights: filter weights at the earlier time, shape (N,).
        targets: particle positions at the later time, shape (M,).
        theta: parameter vector.
        model: state-space model supplying the transition kernel.
        n_tilde: draws per target (>= 1).
        cap: proposals per draw before the exact fallback; 0 forces the
            fallback for every draw.
        rng: live generator for the whole batch.
        stats: optional tally, updated in place.

    Returns:
        int array of shape (M, n_tilde).
    """
    x = np.asarray(positions, dtype=float)
    w = _validate_weights(weights)
    tgt = np.asarray(targets, dtype=float)
    if n_tilde < 1:
        raise ValueError("n_tilde must be >= 1")
    n = x.size
    n_draws = tgt.size * int(n_tilde)
    sup = float(model.transition_sup(theta))
    if not np.isfinite(sup) or sup <= 0:
        raise ValueError(f"transition_sup must be finite and positive, got {sup}")

    out = np.zeros(n_draws, dtype=np.intp)
    if n == 1:
        if stats is not None:
            stats.draws += n_draws
        return out.reshape(tgt.size, int(n_tilde))

    flat_targets = np.repeat(tgt, int(n_tilde))
    pending = np.arange(n_draws)
    proposals_used = np.zeros(n_draws, dtype=np.intp)
    cum = np.cumsum(w)
    total = cum[-1]

    budget = int(cap)
    widths = list(_ROUND_WIDTHS)
    while budget > 0 and pending.size > 0:
        width = min(widths.pop(0) if widths else budget, budget)
        budget -= width
        u = rng.random((pending.size, width)) * total
        prop = np.minimum(np.searchsorted(cum, u, side="right"), n - 1)
        q = np.asarray(model.transition_density(theta, x[prop], flat_targets[pending, None]))
        if np.any(q > sup * (1.0 + 1e-9)):
            raise ValueError(
                "transition density exceeds its declared sup bound; model bug")
        accept = rng.random((pending.size, width)) * sup < q
        hit = accept.any(axis=1)
        first = accept.argmax(axis=1)
        rows = np.nonzero(hit)[0]
        out[pending[rows]] = prop[rows, first[rows]]
        proposals_used[pending] += np.where(hit, first + 1, width)
        pending = pending[~hit]

    if pending.size > 0:
        # Exact inverse-CDF over the full weight row.  Draws that share a
        # target share a row, so build each unique row once.
        uniq, inv = np.unique(flat_targets[pending], return_inverse=True)
        rows = w[None, :] * np.asarray(
            model.transition_density(theta, x[None, :], uniq[:, None]))
        row_cum = np.cumsum(rows, axis=1)
        totals = row_cum[:, -1]
        for r in np.flatnonzero(totals <= 0):
            # Kernel underflowed across the whole row: renormalize in log scale.
            with np.errstate(divide="ignore"):
                log_row = np.log(w) + np.asarray(
                    model.transition_logpdf(theta, x, uniq[r]))
            top = log_row.max()
            if not np.isfinite(top):
                raise SamplerError(
                    f"backward weights identically zero for target {uniq[r]!r}")
            row_cum[r] = np.cumsum(np.exp(log_row - top))
            totals[r] = row_cum[r, -1]
        u = rng.random(pending.size) * totals[inv]
        out[pending] = np.minimum((row_cum[inv] <= u[:, None]).sum(axis=1), n - 1)

    if stats is not None:
        stats.draws += n_draws
        stats.proposals += int(proposals_used.sum())
        stats.fallbacks += int(pending.size)
    return out.reshape(tgt.size, int(n_tilde))


def backward_indices(prev_positions, prev_weights, target, theta, model,
                     n_tilde, cap, rng: np.random.Generator):
    """Backward indices for a single target value; see draw_backward_indices."""
    idx = draw_backward_indices(prev_positions, prev_weights,
                                np.atleast_1d(float(target)), theta, model,
                                n_tilde, cap, rng)
    return idx[0]
