"""Timing harness for the two tangent updates and cost-matching utilities.

Both updates are timed on identical frozen inputs (a realistically
weighted cloud, its propagated successor, and warmed-up tangent
statistics), so the measured scaling reflects the update alone.  The
log-log fitted exponents are the headline output: near 1 for the sampled
update, near 2 for the exact one.
"""

import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as _rng
from .engine import RunConfig, StepSchedule, rml_step, RmlState
from .filtering import init_cloud, propagate, weight_cloud
from .models import get_model
from .rng import BackwardSampleStats, RngStream
from .smoothing import genealogy_update, paris_update, quadratic_update, tau_mean, zero_stats

DEFAULT_GRID = (1000, 2000, 4000, 8000)


def machine_descriptor() -> dict:
    import scipy
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "cpu_count": __import__("os").cpu_count(),
    }


@dataclass
class FrozenInputs:
    """One weighted cloud / successor / tau triple at a fixed parameter."""

    theta: np.ndarray
    prev_cloud: object
    next_cloud: object
    tau: object
    y: float
    ancestors: np.ndarray
    model: object = None


def frozen_inputs(n: int, seed: int, model_id: str = "sv",
                  theta=(0.8, 0.1, 1.0), warmup: int = 10,
                  n_tilde: int = 2) -> FrozenInputs:
    """Warm the filter and smoother for a few steps, then freeze one step's inputs."""
    model = get_model(model_id)
    theta = model.validate_theta(theta)
    _, obs = model.simulate(theta, warmup + 2, seed)
    stream = RngStream(seed)
    cloud = init_cloud(model, theta, n, stream.child(_rng.INIT_CLOUD).generator())
    tau = zero_stats(n, model.dim_theta)
    for t in range(warmup):
        weighted = weight_cloud(cloud, obs[t], theta, model)
        new_cloud, _ = propagate(weighted, theta, model,
                                 stream.child(_rng.PROPAGATE, t).generator())
        tau = paris_update(tau, weighted, new_cloud, obs[t], theta, model,
                           n_tilde, stream.child(_rng.BACKWARD, t).generator())
        cloud = new_cloud
    weighted = weight_cloud(cloud, obs[warmup], theta, model)
    next_cloud, ancestors = propagate(weighted, theta, model,
                                      stream.child(_rng.PROPAGATE, warmup).generator())
    return FrozenInputs(theta=theta, prev_cloud=weighted, next_cloud=next_cloud,
                        tau=tau, y=float(obs[warmup]), ancestors=ancestors, model=model)


def time_callable(fn, min_reps: int = 3, min_total_s: float = 0.25,
                  max_reps: int = 4096):
    """Per-call wall times; repetitions grow until the total is measurable."""
    reps = min_reps
    while True:
        times = []
        start_all = time.perf_counter()
        for _ in range(reps):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        total = time.perf_counter() - start_all
        if total >= min_total_s or reps >= max_reps:
            return np.asarray(times)
        reps = min(max_reps, max(reps * 2, int(reps * (min_total_s / max(total, 1e-9)) + 1)))


@dataclass
class BenchmarkPoint:
    algorithm: str
    n_particles: int
    median_s: float
    p90_s: float
    reps: int
    mean_proposals_per_draw: float | None = None
    fallback_fraction: float | None = None


@dataclass
class BenchmarkReport:
    seed: int
    n_tilde: int
    machine: dict = field(default_factory=machine_descriptor)
    points: list = field(default_factory=list)
    exponents: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_tilde": self.n_tilde,
            "machine": self.machine,
            "points": [asdict(p) for p in self.points],
            "exponents": self.exponents,
        }

    def grid(self, algorithm: str):
        pts = sorted((p for p in self.points if p.algorithm == algorithm),
                     key=lambda p: p.n_particles)
        return (np.array([p.n_particles for p in pts], dtype=float),
                np.array([p.median_s for p in pts]))


def _measure_point(algorithm: str, inputs: FrozenInputs, n_tilde: int, cap: int,
                   seed: int, min_total_s: float) -> BenchmarkPoint:
    stats = BackwardSampleStats()
    counter = {"k": 0}

    if algorithm == "paris":
        def once():
            # A fresh keyed generator per rep keeps reps identically distributed.
            gen = RngStream(seed).child(_rng.BACKWARD, counter["k"]).generator()
            counter["k"] += 1
            paris_update(inputs.tau, inputs.prev_cloud, inputs.next_cloud,
                         inputs.y, inputs.theta, inputs.model, n_tilde, gen,
                         cap=cap, sampler_stats=stats)
    elif algorithm == "quadratic":
        def once():
            quadratic_update(inputs.tau, inputs.prev_cloud, inputs.next_cloud,
                             inputs.y, inputs.theta, inputs.model)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")

    times = time_callable(once, min_total_s=min_total_s)
    return BenchmarkPoint(
        algorithm=algorithm,
        n_particles=inputs.prev_cloud.n,
        median_s=float(np.median(times)),
        p90_s=float(np.percentile(times, 90)),
        reps=times.size,
        mean_proposals_per_draw=(stats.mean_proposals_per_draw
                                 if algorithm == "paris" else None),
        fallback_fraction=(stats.fallback_fraction
                           if algorithm == "paris" else None),
    )


def fitted_exponent(ns, times) -> float:
    """Slope of log(time) against log(N)."""
    ns = np.asarray(ns, dtype=float)
    times = np.asarray(times, dtype=float)
    if ns.size < 2:
        raise ValueError("need at least 2 grid points to fit an exponent")
    return float(np.polyfit(np.log(ns), np.log(times), 1)[0])


def run_benchmark(n_grid=DEFAULT_GRID, seed: int = 0, n_tilde: int = 2,
                  cap: int = 64, algorithms=("paris", "quadratic"),
                  min_total_s: float = 0.25, model_id: str = "sv") -> BenchmarkReport:
    """Time both updates over the particle grid and fit scaling exponents."""
    n_grid = sorted(int(n) for n in n_grid)
    if len(n_grid) < 3:
        raise ValueError("benchmark grid needs at least 3 particle counts")
    report = BenchmarkReport(seed=seed, n_tilde=n_tilde)
    for n in n_grid:
        inputs = frozen_inputs(n, seed, model_id=model_id, n_tilde=n_tilde)
        for algorithm in algorithms:
            report.points.append(
                _measure_point(algorithm, inputs, n_tilde, cap, seed, min_total_s))
    for algorithm in algorithms:
        ns, times = report.grid(algorithm)
        report.exponents[algorithm] = fitted_exponent(ns, times)
    return report


def time_full_step(algorithm: str, n: int, seed: int, n_tilde: int = 2,
                   model_id: str = "sv", theta=(0.8, 0.1, 1.0),
                   min_total_s: float = 0.3) -> float:
    """Median wall time of a complete online step (filter + smoother + score)."""
    model = get_model(model_id)
    config = RunConfig(theta0=theta, n_particles=n, seed=seed, model_id=model_id,
                       algorithm=algorithm, n_tilde=n_tilde,
                       schedule=StepSchedule(0.0, 0.6))
    constraints = config.constraints()
    inputs = frozen_inputs(n, seed, model_id=model_id, theta=theta, n_tilde=n_tilde)
    _, obs = model.simulate(inputs.theta, 3, seed + 1)
    tau_next = paris_update(inputs.tau, inputs.prev_cloud, inputs.next_cloud,
                            inputs.y, inputs.theta, model, n_tilde,
                            RngStream(seed + 3).generator())
    state = RmlState(cloud=inputs.next_cloud, tau=tau_next,
                     theta=inputs.theta, t=inputs.next_cloud.t)
    stream = RngStream(seed + 2)

    def once():
        rml_step(state, obs[0], obs[1], config, model, constraints, stream)

    times = time_callable(once, min_total_s=min_total_s)
    return float(np.median(times))


def matched_quadratic_n(paris_n: int, seed: int = 0, n_tilde: int = 2,
                        probe_grid=(100, 200, 400, 800),
                        min_total_s: float = 0.3) -> int:
    """Particle count at which the exact update costs as much per step as
    the sampled update at ``paris_n``.

    Interpolates the quadratic full-step timing table in log-log space.
    """
    target = time_full_step("paris", paris_n, seed, n_tilde, min_total_s=min_total_s)
    ns = np.asarray(sorted(probe_grid), dtype=float)
    times = np.array([time_full_step("quadratic", int(n), seed, n_tilde,
                                     min_total_s=min_total_s) for n in ns])
    slope, intercept = np.polyfit(np.log(ns), np.log(times), 1)
    n_matched = float(np.exp((np.log(target) - intercept) / slope))
    return int(np.clip(round(n_matched), 16, 8 * paris_n))


def stability_probe(n: int = 100, n_steps: int = 5000, n_replicates: int = 8,
                    seed: int = 0, n_tilde: int = 2, checkpoint_every: int = 250,
                    model_id: str = "sv", theta=(0.8, 0.1, 1.0)) -> dict:
    """Across-replicate variance of the mean tangent statistic over time.

    Runs the sampled update (n_tilde draws) and the ancestor-line control
    side by side on the same filter output; the control's variance is
    expected to degrade much faster with t.  Recorded for inspection, not
    asserted.
    """
    model = get_model(model_id)
    theta = model.validate_theta(theta)
    _, obs = model.simulate(theta, n_steps + 1, seed)
    checkpoints = list(range(checkpoint_every, n_steps + 1, checkpoint_every))
    bars = {"paris": [], "genealogy": []}
    for r in range(n_replicates):
        stream = RngStream(seed).child(_rng.REPLICATE, r)
        cloud = init_cloud(model, theta, n, stream.child(_rng.INIT_CLOUD).generator())
        tau_p = zero_stats(n, model.dim_theta)
        tau_g = zero_stats(n, model.dim_theta)
        rows_p, rows_g = [], []
        for t in range(n_steps):
            weighted = weight_cloud(cloud, obs[t], theta, model)
            new_cloud, ancestors = propagate(
                weighted, theta, model, stream.child(_rng.PROPAGATE, t).generator())
            tau_p = paris_update(tau_p, weighted, new_cloud, obs[t], theta, model,
                                 n_tilde, stream.child(_rng.BACKWARD, t).generator())
            tau_g = genealogy_update(tau_g, ancestors, weighted, new_cloud,
                                     obs[t], theta, model)
            if (t + 1) in checkpoints:
                rows_p.append(tau_mean(tau_p))
                rows_g.append(tau_mean(tau_g))
            cloud = new_cloud
        bars["paris"].append(rows_p)
        bars["genealogy"].append(rows_g)
    out = {"t": checkpoints, "n": n, "n_replicates": n_replicates,
           "n_tilde": n_tilde, "seed": seed}
    for name, rows in bars.items():
        arr = np.asarray(rows)  # (R, checkpoints, d)
        out[f"variance_{name}"] = arr.var(axis=0, ddof=1).tolist()
    return out
