"""Replicated experiment runner and the final-estimate summarizer.

A run takes one shared observation record and R independent replicates
(randomized or explicit starting parameters), writes one trajectory CSV
per replicate, an index JSON that is sufficient to re-launch any
replicate exactly, and a separate timings JSON (wall-clock measurements
are the one thing that legitimately differs between identical runs, so
they stay out of the reproducible artifacts).
"""

import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dataio
from .config import ExperimentConfig, from_dict
from .engine import iter_online
from .models import get_model

INDEX_NAME = "index.json"
TIMINGS_NAME = "timings.json"


def trajectory_filename(replicate: int) -> str:
    return f"trajectory_{replicate:03d}.csv"


def simulate_dataset(config: ExperimentConfig, out_dir) -> Path:
    """Simulate observations per the config's model section and write data.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = (get_model("lgssm", obs_coeff=config.model.obs_coeff)
             if config.model.id == "lgssm" else get_model(config.model.id))
    n_obs = config.experiment.n_observations
    seed = config.experiment.seed
    states, obs = model.simulate(config.model.theta_star, n_obs - 1, seed)
    meta = {
        "config_hash": config.config_hash(),
        "model": config.model.id,
        "theta_star": list(config.model.theta_star),
        "n_observations": int(n_obs),
        "seed": int(seed),
    }
    return dataio.write_data_csv(out_dir / "data.csv", obs,
                                 states=states if config.experiment.save_states else None,
                                 meta=meta)


def run_replicate(config_dict: dict, replicate: int, observations, out_dir) -> dict:
    """Run one replicate to completion, streaming its trajectory to disk.

    Module-level so process pools can dispatch it; reconstructs the config
    from its dict form.  Returns the replicate's index entry plus wall time.
    """
    config = from_dict(config_dict)
    seed = config.replicate_seed(replicate)
    theta0 = config.replicate_theta0(replicate)
    run_cfg = config.run_config(theta0, seed)
    out_dir = Path(out_dir)
    path = out_dir / trajectory_filename(replicate)
    diag_path = (out_dir / f"diagnostics_{replicate:03d}.csv"
                 if config.experiment.diagnostics else None)

    start = time.perf_counter()
    n_steps = 0
    n_degenerate = 0
    final_theta = None
    with dataio.TrajectoryWriter(path, config.config_hash(), seed,
                                 diagnostics_path=diag_path) as writer:
        for rec in iter_online(observations, run_cfg):
            writer.write(rec)
            n_steps += 1
            n_degenerate += int(rec.degenerate)
            final_theta = rec.theta
    wall = time.perf_counter() - start

    return {
        "replicate": int(replicate),
        "seed": int(seed),
        "theta0": [float(v) for v in theta0],
        "trajectory": path.name,
        "final_theta": None if final_theta is None else [float(v) for v in final_theta],
        "n_steps": int(n_steps),
        "n_degenerate": int(n_degenerate),
        "error": None,
        "wall_time_s": wall,
    }


def run_experiment(config: ExperimentConfig, observations, out_dir,
                   replicates=None, workers=None) -> dict:
    """Run all replicates (isolating per-replicate failures) and write the index.

    Returns the index dict; inspect entry["error"] per replicate.  Failed
    replicates do not stop the others.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_rep = config.experiment.replicates if replicates is None else int(replicates)
    n_workers = config.experiment.workers if workers is None else int(workers)
    cfg_dict = config.to_dict()
    obs = np.asarray(observations, dtype=float)

    entries = [None] * n_rep
    if n_workers > 1 and n_rep > 1:
        with ProcessPoolExecutor(max_workers=min(n_workers, n_rep)) as pool:
            futures = {
                pool.submit(run_replicate, cfg_dict, r, obs, str(out_dir)): r
                for r in range(n_rep)}
            for fut, r in futures.items():
                try:
                    entries[r] = fut.result()
                except Exception as err:  # isolate the failed replicate
                    entries[r] = _failed_entry(config, r, err)
    else:
        for r in range(n_rep):
            try:
                entries[r] = run_replicate(cfg_dict, r, obs, str(out_dir))
            except Exception as err:
                entries[r] = _failed_entry(config, r, err)

    walls = [e.pop("wall_time_s", None) for e in entries]
    timings = {
        "total_s": float(sum(w or 0.0 for w in walls)),
        "replicates": [
            {"replicate": e["replicate"], "wall_time_s": w}
            for e, w in zip(entries, walls)],
    }
    index = {
        "config_hash": config.config_hash(),
        "seed": int(config.experiment.seed),
        "config": cfg_dict,
        "n_observations": int(obs.size),
        "replicates": entries,
    }
    dataio.write_json(out_dir / INDEX_NAME, index)
    dataio.write_json(out_dir / TIMINGS_NAME, timings)
    return index


def _failed_entry(config: ExperimentConfig, replicate: int, err: Exception) -> dict:
    return {
        "replicate": int(replicate),
        "seed": int(config.replicate_seed(replicate)),
        "theta0": [float(v) for v in config.replicate_theta0(replicate)],
        "trajectory": None,
        "final_theta": None,
        "n_steps": 0,
        "n_degenerate": 0,
        "error": f"{type(err).__name__}: {err}",
        "wall_time_s": None,
    }


def replay_replicate(index: dict, replicate: int, observations):
    """Re-run one replicate exactly as recorded in an index.

    Yields the same StepRecords the original run wrote; used to verify
    that the index is sufficient to relaunch any replicate bit-for-bit.
    """
    config = from_dict(index["config"])
    entry = index["replicates"][replicate]
    run_cfg = config.run_config(np.asarray(entry["theta0"]), entry["seed"])
    return iter_online(observations, run_cfg)


def summarize_index(index: dict, out_dir) -> dict:
    """Final-estimate summary across replicates.

    The headline metric is the across-replicate variance (ddof=1) of each
    final parameter estimate, the same statistic used to compare the two
    algorithms' precision on a common data set.
    """
    out_dir = Path(out_dir)
    ok = [e for e in index["replicates"] if e.get("error") is None and e.get("final_theta")]
    finals = np.asarray([e["final_theta"] for e in ok], dtype=float)
    names = ("phi", "sigma2", "beta2")
    summary = {
        "config_hash": index["config_hash"],
        "seed": index["seed"],
        "n_replicates": len(index["replicates"]),
        "n_failed": sum(1 for e in index["replicates"] if e.get("error") is not None),
        "final_estimates": {e["replicate"]: e["final_theta"] for e in ok},
        "final_mean": {},
        "final_variance": {},
        "n_degenerate_total": int(sum(e.get("n_degenerate", 0) for e in ok)),
    }
    if finals.size:
        mean = finals.mean(axis=0)
        var = (finals.var(axis=0, ddof=1) if finals.shape[0] > 1
               else np.zeros(finals.shape[1]))
        summary["final_mean"] = {n: float(v) for n, v in zip(names, mean)}
        summary["final_variance"] = {n: float(v) for n, v in zip(names, var)}
    return summary


def write_summary(index: dict, out_dir) -> dict:
    """Write summary.json and summary.csv next to the trajectories."""
    out_dir = Path(out_dir)
    summary = summarize_index(index, out_dir)
    dataio.write_json(out_dir / "summary.json", summary)
    names = ("phi", "sigma2", "beta2")
    lines = [dataio.stamp_line(summary["config_hash"], summary["seed"]),
             "replicate," + ",".join(names)]
    for r, theta in sorted(summary["final_estimates"].items()):
        lines.append(f"{r}," + ",".join(dataio.fmt(v) for v in theta))
    if summary["final_mean"]:
        lines.append("mean," + ",".join(dataio.fmt(summary["final_mean"][n]) for n in names))
        lines.append("variance," + ",".join(
            dataio.fmt(summary["final_variance"][n]) for n in names))
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n")
    return summary
