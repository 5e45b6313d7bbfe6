"""Experiment configuration: YAML files with model/algorithm/schedule/experiment sections.

Parsing is total: any invalid file produces a ConfigError naming the
offending key (``section.key: problem``), never a stack trace from deep
inside the library.  Configurations round-trip losslessly through
``to_dict`` / ``from_dict``, and ``config_hash`` fingerprints the resolved
values for embedding in every output artifact.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .engine import ALGORITHMS, RunConfig, StepSchedule
from .models import DEFAULT_PARAM_FLOOR
from .rng import THETA0, RngStream, replicate_seed

DEFAULT_THETA0_BOX = {
    "phi": (0.1, 0.95),
    "sigma2": (0.05, 1.0),
    "beta2": (0.3, 3.0),
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _fail(path, problem):
    raise ConfigError(f"{path}: {problem}")


def _take(section: dict, path: str, key: str, default, caster):
    if key not in section:
        return default
    value = section.pop(key)
    try:
        return caster(value)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        _fail(f"{path}.{key}", f"invalid value {value!r} ({err})")


def _cast_bool(v):
    if isinstance(v, bool):
        return v
    raise ValueError("expected true/false")


def _cast_vec3(v):
    arr = [float(x) for x in v]
    if len(arr) != 3:
        raise ValueError("expected 3 components (phi, sigma2, beta2)")
    return tuple(arr)


def _cast_box(v):
    if not isinstance(v, dict):
        raise ValueError("expected a mapping with keys phi, sigma2, beta2")
    box = {}
    for name in ("phi", "sigma2", "beta2"):
        if name not in v:
            raise ValueError(f"missing component {name!r}")
        lo, hi = (float(x) for x in v[name])
        if not lo <= hi:
            raise ValueError(f"{name} bounds must satisfy low <= high")
        box[name] = (lo, hi)
    extra = set(v) - {"phi", "sigma2", "beta2"}
    if extra:
        raise ValueError(f"unknown component(s) {sorted(extra)}")
    return box


def _no_leftovers(section: dict, path: str):
    if section:
        _fail(f"{path}.{sorted(section)[0]}", "unknown key")


@dataclass(frozen=True)
class ModelSection:
    id: str = "sv"
    theta_star: tuple = (0.8, 0.1, 1.0)
    obs_coeff: float = 1.0
    constraint_floor: float = DEFAULT_PARAM_FLOOR


@dataclass(frozen=True)
class AlgorithmSection:
    name: str = "paris"
    n_particles: int = 500
    n_tilde: int = 2
    rejection_cap: int = 64
    paper_fidelity: bool = False
    t3_threshold: float = 1e-300


@dataclass(frozen=True)
class ScheduleSection:
    gamma0: float = 1.0
    alpha: float = 0.6


@dataclass(frozen=True)
class ExperimentSection:
    n_observations: int = 1000
    seed: int = 0
    replicates: int = 1
    theta0: tuple | None = None
    theta0_box: dict = field(default_factory=lambda: dict(DEFAULT_THETA0_BOX))
    data: str | None = None
    out: str = "out"
    save_states: bool = False
    diagnostics: bool = False
    workers: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    algorithm: AlgorithmSection = field(default_factory=AlgorithmSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"]["theta_star"] = list(self.model.theta_star)
        d["experiment"]["theta0"] = (
            None if self.experiment.theta0 is None else list(self.experiment.theta0))
        d["experiment"]["theta0_box"] = {
            k: list(v) for k, v in self.experiment.theta0_box.items()}
        return d

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def replicate_seed(self, replicate: int) -> int:
        return replicate_seed(self.experiment.seed, replicate)

    def replicate_theta0(self, replicate: int) -> np.ndarray:
        """Starting point for one replicate: explicit, or drawn from the box."""
        if self.experiment.theta0 is not None:
            return np.asarray(self.experiment.theta0, dtype=float)
        gen = RngStream(self.experiment.seed).child(THETA0, replicate).generator()
        box = self.experiment.theta0_box
        return np.array([gen.uniform(*box["phi"]),
                         gen.uniform(*box["sigma2"]),
                         gen.uniform(*box["beta2"])])

    def run_config(self, theta0, seed) -> RunConfig:
        return RunConfig(
            theta0=np.asarray(theta0, dtype=float),
            n_particles=self.algorithm.n_particles,
            seed=int(seed),
            model_id=self.model.id,
            obs_coeff=self.model.obs_coeff,
            algorithm=self.algorithm.name,
            n_tilde=self.algorithm.n_tilde,
            rejection_cap=self.algorithm.rejection_cap,
            schedule=StepSchedule(self.schedule.gamma0, self.schedule.alpha),
            constraint_floor=self.model.constraint_floor,
            t3_threshold=self.algorithm.t3_threshold,
            paper_fidelity=self.algorithm.paper_fidelity,
            n_observations=self.experiment.n_observations,
        )


def from_dict(raw: dict) -> ExperimentConfig:
    """Validate a nested mapping into an ExperimentConfig."""
    if not isinstance(raw, dict):
        _fail("<root>", f"expected a mapping of sections, got {type(raw).__name__}")
    raw = dict(raw)
    sections = {}
    for name in ("model", "algorithm", "schedule", "experiment"):
        sec = raw.pop(name, {})
        if sec is None:
            sec = {}
        if not isinstance(sec, dict):
            _fail(name, f"expected a mapping, got {type(sec).__name__}")
        sections[name] = dict(sec)
    if raw:
        _fail(sorted(raw)[0], "unknown section")

    m = sections["model"]
    model = ModelSection(
        id=_take(m, "model", "id", "sv", str),
        theta_star=_take(m, "model", "theta_star", (0.8, 0.1, 1.0), _cast_vec3),
        obs_coeff=_take(m, "model", "obs_coeff", 1.0, float),
        constraint_floor=_take(m, "model", "constraint_floor", DEFAULT_PARAM_FLOOR, float),
    )
    _no_leftovers(m, "model")
    if model.id not in ("sv", "lgssm"):
        _fail("model.id", f"unknown model {model.id!r}; expected 'sv' or 'lgssm'")
    if not 0 < model.constraint_floor < 1:
        _fail("model.constraint_floor", f"must be in (0, 1), got {model.constraint_floor}")

    a = sections["algorithm"]
    algorithm = AlgorithmSection(
        name=_take(a, "algorithm", "name", "paris", str),
        n_particles=_take(a, "algorithm", "n_particles", 500, int),
        n_tilde=_take(a, "algorithm", "n_tilde", 2, int),
        rejection_cap=_take(a, "algorithm", "rejection_cap", 64, int),
        paper_fidelity=_take(a, "algorithm", "paper_fidelity", False, _cast_bool),
        t3_threshold=_take(a, "algorithm", "t3_threshold", 1e-300, float),
    )
    _no_leftovers(a, "algorithm")
    if algorithm.name not in ALGORITHMS:
        _fail("algorithm.name", f"expected one of {list(ALGORITHMS)}, got {algorithm.name!r}")
    if algorithm.n_particles < 1:
        _fail("algorithm.n_particles", f"must be >= 1, got {algorithm.n_particles}")
    if algorithm.n_tilde < 1:
        _fail("algorithm.n_tilde", f"must be >= 1, got {algorithm.n_tilde}")
    if algorithm.rejection_cap < 0:
        _fail("algorithm.rejection_cap", f"must be >= 0, got {algorithm.rejection_cap}")

    s = sections["schedule"]
    schedule = ScheduleSection(
        gamma0=_take(s, "schedule", "gamma0", 1.0, float),
        alpha=_take(s, "schedule", "alpha", 0.6, float),
    )
    _no_leftovers(s, "schedule")
    try:
        StepSchedule(schedule.gamma0, schedule.alpha)
    except ValueError as err:
        _fail("schedule", str(err))

    e = sections["experiment"]
    experiment = ExperimentSection(
        n_observations=_take(e, "experiment", "n_observations", 1000, int),
        seed=_take(e, "experiment", "seed", 0, int),
        replicates=_take(e, "experiment", "replicates", 1, int),
        theta0=_take(e, "experiment", "theta0", None,
                     lambda v: None if v is None else _cast_vec3(v)),
        theta0_box=_take(e, "experiment", "theta0_box", dict(DEFAULT_THETA0_BOX), _cast_box),
        data=_take(e, "experiment", "data", None,
                   lambda v: None if v is None else str(v)),
        out=_take(e, "experiment", "out", "out", str),
        save_states=_take(e, "experiment", "save_states", False, _cast_bool),
        diagnostics=_take(e, "experiment", "diagnostics", False, _cast_bool),
        workers=_take(e, "experiment", "workers", 1, int),
    )
    _no_leftovers(e, "experiment")
    if experiment.n_observations < 1:
        _fail("experiment.n_observations", f"must be >= 1, got {experiment.n_observations}")
    if experiment.replicates < 1:
        _fail("experiment.replicates", f"must be >= 1, got {experiment.replicates}")
    if experiment.workers < 1:
        _fail("experiment.workers", f"must be >= 1, got {experiment.workers}")

    return ExperimentConfig(model=model, algorithm=algorithm,
                            schedule=schedule, experiment=experiment)


def preset_names() -> list:
    root = resources.files("paris_rml") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_config(source) -> ExperimentConfig:
    """Load a YAML config from a path, or a shipped preset by bare name."""
    path = Path(source)
    if path.exists():
        text = path.read_text()
    else:
        preset = resources.files("paris_rml") / "presets" / f"{source}.yaml"
        if preset.is_file():
            text = preset.read_text()
        else:
            raise ConfigError(
                f"config {source!r} is neither a file nor a preset "
                f"(presets: {', '.join(preset_names())})")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"{source}: not valid YAML ({err})") from None
    if raw is None:
        raw = {}
    return from_dict(raw)
