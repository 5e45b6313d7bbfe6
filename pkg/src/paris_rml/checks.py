"""Self-contained oracle agreement checks, runnable from the CLI.

Each check compares an analytic quantity against an independent
reference (finite differences, a dense-covariance likelihood, a
closed-form bound, or a long-run statistical property) and reports the
worst observed error against its tolerance.  A fresh checkout passes
every check; they double as a fast sanity gate after any model change.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import multivariate_normal

from .kalman import LgssmSpec, fd_score, kalman_filter
from .models import get_model


@dataclass
class CheckResult:
    name: str
    passed: bool
    metric: float
    tolerance: float
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed),
                "metric": float(self.metric), "tolerance": float(self.tolerance),
                "detail": self.detail}


def rel_err(a, b, floor: float = 1e-3) -> np.ndarray:
    """Componentwise |a - b| / max(|b|, floor)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(np.abs(b), floor)


def _random_spec(gen) -> LgssmSpec:
    return LgssmSpec(phi=gen.uniform(-0.9, 0.9),
                     sigma2=gen.uniform(0.05, 2.0),
                     beta2=gen.uniform(0.1, 3.0),
                     obs_coeff=gen.uniform(0.5, 1.5))


def _simulate_lgssm(spec: LgssmSpec, n_obs: int, seed: int) -> np.ndarray:
    model = get_model("lgssm", obs_coeff=spec.obs_coeff)
    _, obs = model.simulate(spec.theta, n_obs - 1, seed)
    return obs


def check_kalman_score_vs_fd(seed: int = 0, n_instances: int = 20, n_obs: int = 100,
                             h: float = 1e-5, tol: float = 1e-4) -> CheckResult:
    """Sensitivity-recursion score against central differences of the log-likelihood."""
    gen = np.random.default_rng(seed)
    worst = 0.0
    for k in range(n_instances):
        spec = _random_spec(gen)
        obs = _simulate_lgssm(spec, n_obs, seed * 1000 + k)
        _, scores = kalman_filter(spec, obs)
        fd = fd_score(spec, obs, h)
        worst = max(worst, float(rel_err(scores.sum(axis=0), fd).max()))
    return CheckResult("kalman_score_vs_fd", worst < tol, worst, tol,
                       f"{n_instances} random instances, T={n_obs}, seed={seed}")


def check_kalman_loglik_vs_dense(seed: int = 0, n_obs: int = 50,
                                 tol: float = 1e-8) -> CheckResult:
    """Recursion log-likelihood against the joint Gaussian density built
    from the full T-by-T observation covariance."""
    gen = np.random.default_rng(seed)
    worst = 0.0
    for k in range(5):
        spec = _random_spec(gen)
        obs = _simulate_lgssm(spec, n_obs, seed * 1000 + 17 + k)
        lls, _ = kalman_filter(spec, obs)
        idx = np.arange(n_obs)
        state_cov = (spec.sigma2 / (1.0 - spec.phi**2)
                     * spec.phi ** np.abs(idx[:, None] - idx[None, :]))
        cov = spec.obs_coeff**2 * state_cov + spec.beta2 * np.eye(n_obs)
        dense = multivariate_normal(mean=np.zeros(n_obs), cov=cov).logpdf(obs)
        worst = max(worst, abs(float(lls.sum()) - float(dense)))
    return CheckResult("kalman_loglik_vs_dense", worst < tol, worst, tol,
                       f"5 random instances, T={n_obs}, seed={seed}")


def _fd_theta(f, theta, h: float = 1e-6) -> np.ndarray:
    out = np.empty(3)
    for j in range(3):
        plus, minus = theta.copy(), theta.copy()
        plus[j] += h
        minus[j] -= h
        out[j] = (f(plus) - f(minus)) / (2.0 * h)
    return out


def _random_interior(gen):
    theta = np.array([gen.uniform(-0.9, 0.9),
                      gen.uniform(0.05, 2.0),
                      gen.uniform(0.2, 3.0)])
    x = gen.normal(0.0, 1.2)
    x_next = gen.normal(0.0, 1.2)
    y = gen.normal(0.0, 1.5)
    return theta, x, x_next, y


def check_grad_log_transition(model=None, seed: int = 0, n_points: int = 50,
                              h: float = 1e-6, tol: float = 1e-4) -> CheckResult:
    """Analytic transition log-density gradient against finite differences."""
    model = model or get_model("sv")
    gen = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        theta, x, x_next, _ = _random_interior(gen)
        analytic = model.grad_log_transition(theta, x, x_next)
        fd = _fd_theta(lambda th: float(model.transition_logpdf(th, x, x_next)), theta, h)
        worst = max(worst, float(rel_err(analytic, fd).max()))
    return CheckResult(f"grad_log_transition[{model.name}]", worst < tol, worst, tol,
                       f"{n_points} random interior points, seed={seed}")


def check_grad_log_emission(model=None, seed: int = 0, n_points: int = 50,
                            h: float = 1e-6, tol: float = 1e-4) -> CheckResult:
    """Analytic emission log-density gradient against finite differences."""
    model = model or get_model("sv")
    gen = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        theta, x, _, y = _random_interior(gen)
        analytic = model.grad_log_emission(theta, x, y)
        fd = _fd_theta(lambda th: float(model.emission_logpdf(th, x, y)), theta, h)
        worst = max(worst, float(rel_err(analytic, fd).max()))
    return CheckResult(f"grad_log_emission[{model.name}]", worst < tol, worst, tol,
                       f"{n_points} random interior points, seed={seed}")


def check_chain_rule(model=None, seed: int = 0, n_points: int = 200,
                     tol: float = 1e-12) -> CheckResult:
    """grad g = g * grad log g, pointwise."""
    model = model or get_model("sv")
    gen = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        theta, x, _, y = _random_interior(gen)
        ge = model.grad_emission(theta, x, y)
        ref = float(model.emission_density(theta, x, y)) * model.grad_log_emission(theta, x, y)
        worst = max(worst, float(np.max(np.abs(ge - ref))))
    return CheckResult(f"chain_rule[{model.name}]", worst <= tol, worst, tol,
                       f"{n_points} random points, seed={seed}")


def check_transition_sup(model=None, seed: int = 0, n_pairs: int = 10_000,
                         tol: float = 0.0) -> CheckResult:
    """Declared kernel sup bound dominates the density on random point pairs."""
    model = model or get_model("sv")
    gen = np.random.default_rng(seed)
    worst = 0.0
    for theta in ([0.8, 0.1, 1.0], [0.0, 1.0, 1.0], [-0.9, 0.3, 2.0]):
        theta = np.asarray(theta)
        sup = model.transition_sup(theta)
        x = gen.normal(0.0, 2.0, n_pairs)
        x_next = gen.normal(0.0, 2.0, n_pairs)
        excess = float((model.transition_density(theta, x, x_next) - sup).max())
        worst = max(worst, excess)
    return CheckResult(f"transition_sup[{model.name}]", worst <= tol, worst, tol,
                       f"{n_pairs} pairs per theta, seed={seed}")


def check_score_martingale(seed: int = 0, n_obs: int = 100_000) -> CheckResult:
    """At the generating parameter, the average per-step score is ~0.

    Passes when every component of the long-run average lies within 3
    estimated standard errors of zero.
    """
    spec = LgssmSpec(0.8, 0.1, 1.0)
    obs = _simulate_lgssm(spec, n_obs, seed + 99)
    _, scores = kalman_filter(spec, obs)
    avg = scores.mean(axis=0)
    se = scores.std(axis=0, ddof=1) / np.sqrt(scores.shape[0])
    metric = float(np.max(np.abs(avg) / se))
    return CheckResult("kalman_score_martingale", metric < 3.0, metric, 3.0,
                       f"max |avg|/SE over components, T={n_obs}, seed={seed}")


def run_all_checks(seed: int = 0) -> list:
    """The full oracle suite in a deterministic order."""
    sv = get_model("sv")
    lg = get_model("lgssm", obs_coeff=1.3)
    return [
        check_kalman_score_vs_fd(seed=seed),
        check_kalman_loglik_vs_dense(seed=seed),
        check_grad_log_transition(sv, seed=seed),
        check_grad_log_emission(sv, seed=seed),
        check_grad_log_transition(lg, seed=seed + 1),
        check_grad_log_emission(lg, seed=seed + 1),
        check_chain_rule(sv, seed=seed),
        check_chain_rule(lg, seed=seed),
        check_transition_sup(sv, seed=seed),
        check_score_martingale(seed=seed),
    ]


def report_dict(results, seed: int) -> dict:
    return {
        "seed": int(seed),
        "all_passed": all(r.passed for r in results),
        "checks": [r.as_dict() for r in results],
    }
