"""Online parameter recursion driving the filter and tangent smoother.

One step consumes the observation pair (y_t, y_{t+1}): the cloud at t is
weighted with y_t, resampled and propagated to t + 1, the tangent
statistics are updated (sampled or exact), the score increment for
y_{t+1} is assembled from the three averaged terms, and the parameter is
moved by a projected Robbins-Monro step.  The final observation of a
record therefore contributes only to the last score, never to a weight.

Degenerate steps (total weight collapse, or a score normalizer below the
configured threshold) freeze the parameter for that step, record a flag,
and let the run continue; they never abort it.  A non-finite parameter
update is a hard error carrying a state dump.
"""

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as _rng
from .filtering import (DegeneracyError, ParticleCloud, effective_sample_size,
                        init_cloud, propagate, uniform_weights, weight_cloud)
from .models import ConstraintSet, get_model
from .rng import BackwardSampleStats, RngStream, SamplerError
from .smoothing import (TauStats, genealogy_update, paris_update,
                        quadratic_update, tau_mean, zero_stats)

ALGORITHMS = ("paris", "quadratic")

PARAM_NAMES = ("phi", "sigma2", "beta2")


class RmlError(RuntimeError):
    """Hard failure of the recursion; carries a state dump for debugging."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes gamma_t = gamma0 * t^(-alpha) for t >= 1.

    The exponent must satisfy 0.5 < alpha <= 1 so the usual stochastic
    approximation conditions hold.  gamma0 = 0 freezes the parameter; the
    oracle-validation runs rely on this.
    """

    gamma0: float = 1.0
    alpha: float = 0.6

    def __post_init__(self):
        if not 0.5 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0.5, 1], got {self.alpha}")
        if not (np.isfinite(self.gamma0) and self.gamma0 >= 0):
            raise ValueError(f"gamma0 must be finite and >= 0, got {self.gamma0}")

    def gamma(self, t: int) -> float:
        if t < 1:
            raise ValueError(f"step index must be >= 1, got {t}")
        return self.gamma0 * float(t) ** (-self.alpha)


@dataclass(frozen=True)
class ScoreIncrement:
    """The three averaged score terms and the resulting update direction."""

    t1: np.ndarray
    t2: np.ndarray
    t3: float
    zeta: np.ndarray


@dataclass(frozen=True)
class RunConfig:
    """Everything one online run needs; immutable and serializable."""

    theta0: np.ndarray
    n_particles: int
    seed: int
    model_id: str = "sv"
    obs_coeff: float = 1.0
    algorithm: str = "paris"
    n_tilde: int = 2
    rejection_cap: int = _rng.DEFAULT_REJECTION_CAP
    schedule: StepSchedule = field(default_factory=StepSchedule)
    constraint_floor: float = 1e-4
    t3_threshold: float = 1e-300
    max_step: float | None = 0.5
    paper_fidelity: bool = False
    n_observations: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "theta0", np.asarray(self.theta0, dtype=float))
        if self.n_particles < 1:
            raise ValueError(f"n_particles must be >= 1, got {self.n_particles}")
        if self.n_tilde < 1:
            raise ValueError(f"n_tilde must be >= 1, got {self.n_tilde}")
        if self.rejection_cap < 0:
            raise ValueError(f"rejection_cap must be >= 0, got {self.rejection_cap}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.n_observations is not None and self.n_observations < 1:
            raise ValueError(f"n_observations must be >= 1, got {self.n_observations}")
        if self.max_step is not None and not self.max_step > 0:
            raise ValueError(f"max_step must be positive or None, got {self.max_step}")

    def model(self):
        if self.model_id == "lgssm":
            return get_model("lgssm", obs_coeff=self.obs_coeff)
        return get_model(self.model_id)

    def constraints(self) -> ConstraintSet:
        return self.model().constraints(self.constraint_floor)

    @property
    def effective_t3_floor(self) -> float:
        # Fidelity mode keeps the division unguarded for any positive T3.
        return 0.0 if self.paper_fidelity else self.t3_threshold

    @property
    def effective_max_step(self) -> float | None:
        # Fidelity mode applies the raw update, spikes and all.
        return None if self.paper_fidelity else self.max_step


@dataclass(frozen=True)
class RmlState:
    """Recursion state between observations."""

    cloud: ParticleCloud
    tau: TauStats
    theta: np.ndarray
    t: int

    def __post_init__(self):
        if self.cloud.t != self.t or self.tau.t != self.t:
            raise ValueError(
                f"inconsistent state: t={self.t}, cloud.t={self.cloud.t}, tau.t={self.tau.t}")


@dataclass(frozen=True)
class StepRecord:
    """One emitted trajectory row plus per-step diagnostics."""

    t: int
    theta: np.ndarray
    zeta: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    t3: float
    gamma: float
    degenerate: bool
    reason: str
    ess: float
    weight_total: float
    tau_bar: np.ndarray
    proposals_per_draw: float
    fallback_fraction: float


def score_terms(next_cloud: ParticleCloud, tau_next: TauStats, y_next, theta, model,
                t3_floor: float = 0.0) -> ScoreIncrement:
    """Assemble (T1, T2, T3) on the prediction cloud and form zeta = (T1 + T2) / T3.

    T1 averages the emission-density gradient, T2 the centered tangent
    statistics weighted by the emission density, T3 the emission density
    itself.  Raises DegeneracyError (carrying the partial terms) when T3
    does not exceed ``t3_floor``.
    """
    if tau_next.t != next_cloud.t or tau_next.n != next_cloud.n:
        raise ValueError("tau statistics must be aligned with the prediction cloud")
    g = np.asarray(model.emission_density(theta, next_cloud.positions, y_next), dtype=float)
    gle = model.grad_log_emission(theta, next_cloud.positions, y_next)
    t1 = (g[:, None] * gle).mean(axis=0)
    centered = tau_next.tau - tau_next.tau.mean(axis=0)
    t2 = (centered * g[:, None]).mean(axis=0)
    t3 = float(g.mean())
    if not t3 > t3_floor:
        raise DegeneracyError(
            next_cloud.t, f"score normalizer T3={t3:.3e} at or below floor {t3_floor:.3e}",
            partial=ScoreIncrement(t1=t1, t2=t2, t3=t3, zeta=np.full(t1.shape, np.nan)))
    zeta = (t1 + t2) / t3
    return ScoreIncrement(t1=t1, t2=t2, t3=t3, zeta=zeta)


def rml_step(state: RmlState, y_t, y_next, config: RunConfig, model,
             constraints: ConstraintSet, stream: RngStream):
    """Advance the recursion by one observation.

    Returns (new state, StepRecord, ancestor indices); the ancestors are
    exposed for diagnostics only.  All randomness comes from substreams
    keyed by (seed, purpose, t), so a step's draws depend only on the
    configuration, never on scheduling.
    """
    t = state.t
    theta = state.theta
    degenerate = False
    reason = ""

    weight_total = 0.0
    try:
        weighted = weight_cloud(state.cloud, y_t, theta, model)
        weight_total = float(weighted.weights.sum())
    except DegeneracyError as err:
        # Blind move: keep the filter alive on uniform weights, drop the update.
        degenerate, reason = True, err.reason
        weighted = replace(state.cloud, weights=uniform_weights(state.cloud.n))
    ess = effective_sample_size(weighted.weights)

    new_cloud, ancestors = propagate(
        weighted, theta, model, stream.child(_rng.PROPAGATE, t).generator())

    include_transition = not (config.paper_fidelity and t == 0)
    sampler_stats = BackwardSampleStats()
    try:
        if config.algorithm == "paris":
            tau_next = paris_update(
                state.tau, weighted, new_cloud, y_t, theta, model,
                config.n_tilde, stream.child(_rng.BACKWARD, t).generator(),
                cap=config.rejection_cap, include_transition=include_transition,
                sampler_stats=sampler_stats)
        else:
            tau_next = quadratic_update(
                state.tau, weighted, new_cloud, y_t, theta, model,
                include_transition=include_transition)
    except (DegeneracyError, SamplerError) as err:
        # Backward weights dead for some target: the backward law collapses
        # onto the resampling ancestors, so continue along those and skip
        # the parameter update.
        degenerate, reason = True, str(err)
        tau_next = genealogy_update(state.tau, ancestors, weighted, new_cloud,
                                    y_t, theta, model,
                                    include_transition=include_transition)

    nan3 = np.full(3, np.nan)
    if degenerate:
        inc = ScoreIncrement(t1=nan3, t2=nan3, t3=np.nan, zeta=nan3)
    else:
        try:
            inc = score_terms(new_cloud, tau_next, y_next, theta, model,
                              t3_floor=config.effective_t3_floor)
        except DegeneracyError as err:
            degenerate, reason = True, err.reason
            inc = err.partial

    gamma = config.schedule.gamma(t + 1)
    if degenerate:
        new_theta = theta
    else:
        delta = gamma * inc.zeta
        cap = config.effective_max_step
        if cap is not None:
            # Truncated update: a parameter pinned at a variance floor makes
            # the score summands blow up like 1/theta^2, and the resulting
            # spike would fling the iterate far outside the region the
            # shrinking step sizes can bring it back from.  Bounding the move
            # leaves ordinary steps untouched (gamma * zeta shrinks to zero).
            delta = np.clip(delta, -cap, cap)
        new_theta = constraints.project(theta + delta)
        if not np.all(np.isfinite(new_theta)):
            raise RmlError(
                f"non-finite parameter update at t={t}",
                dump={"t": t, "theta": theta, "zeta": inc.zeta, "t1": inc.t1,
                      "t2": inc.t2, "t3": inc.t3, "gamma": gamma})

    record = StepRecord(
        t=t + 1, theta=new_theta, zeta=inc.zeta, t1=inc.t1, t2=inc.t2, t3=inc.t3,
        gamma=gamma, degenerate=degenerate, reason=reason, ess=ess,
        weight_total=weight_total, tau_bar=tau_mean(tau_next),
        proposals_per_draw=sampler_stats.mean_proposals_per_draw,
        fallback_fraction=sampler_stats.fallback_fraction)
    new_state = RmlState(cloud=new_cloud, tau=tau_next, theta=new_theta, t=t + 1)
    return new_state, record, ancestors


def iter_online(observations, config: RunConfig):
    """Fold the recursion over an observation stream, yielding StepRecords.

    Memory use is constant in the stream length; callers that want the
    whole trajectory in memory should use :func:`run_online`.  The stream
    may be any iterable of floats; it is consumed lazily and a stream that
    ends mid-pair simply terminates the run after the last complete step.
    """
    model = config.model()
    constraints = config.constraints()
    theta0 = constraints.project(model.validate_theta(config.theta0))

    stream = RngStream(config.seed)
    cloud = init_cloud(model, theta0, config.n_particles,
                       stream.child(_rng.INIT_CLOUD).generator())
    state = RmlState(cloud=cloud, tau=zero_stats(config.n_particles, model.dim_theta),
                     theta=theta0, t=0)

    obs = iter(observations)
    if config.n_observations is not None:
        obs = itertools.islice(obs, config.n_observations)
    try:
        y_t = float(next(obs))
    except StopIteration:
        raise ValueError("need at least 2 observations to take a step") from None
    first = True
    for y_next in obs:
        y_next = float(y_next)
        state, record, _ = rml_step(state, y_t, y_next, config, model, constraints, stream)
        yield record
        y_t = y_next
        first = False
    if first:
        raise ValueError("need at least 2 observations to take a step")


@dataclass
class Trajectory:
    """A completed run: the starting point plus stacked per-step columns."""

    theta0: np.ndarray
    steps: np.ndarray
    thetas: np.ndarray
    zetas: np.ndarray
    t1s: np.ndarray
    t2s: np.ndarray
    t3s: np.ndarray
    gammas: np.ndarray
    degenerate: np.ndarray
    ess: np.ndarray
    weight_totals: np.ndarray

    @classmethod
    def from_records(cls, theta0, records) -> "Trajectory":
        records = list(records)
        return cls(
            theta0=np.asarray(theta0, dtype=float),
            steps=np.array([r.t for r in records], dtype=int),
            thetas=np.array([r.theta for r in records]),
            zetas=np.array([r.zeta for r in records]),
            t1s=np.array([r.t1 for r in records]),
            t2s=np.array([r.t2 for r in records]),
            t3s=np.array([r.t3 for r in records]),
            gammas=np.array([r.gamma for r in records]),
            degenerate=np.array([r.degenerate for r in records], dtype=bool),
            ess=np.array([r.ess for r in records]),
            weight_totals=np.array([r.weight_total for r in records]),
        )

    @property
    def final_theta(self) -> np.ndarray:
        return self.thetas[-1]

    def __len__(self) -> int:
        return self.steps.size


def run_online(observations, config: RunConfig) -> Trajectory:
    """Run the full recursion and collect the trajectory in memory."""
    return Trajectory.from_records(config.theta0, iter_online(observations, config))
