"""Command-line front end: simulate | run | benchmark | oracle-check | summarize."""

import dataclasses
import sys
from pathlib import Path

import click
import numpy as np

from . import benchmark as bench
from . import checks, dataio, experiments, plots
from .config import ConfigError, load_config


def _load(config_path):
    try:
        return load_config(config_path)
    except ConfigError as err:
        raise click.ClickException(str(err))


def _override(config, updates):
    """Apply CLI overrides (a {(section, key): value} map) onto the config."""
    sections = {}
    for section_name in ("model", "algorithm", "schedule", "experiment"):
        section = getattr(config, section_name)
        fields = {k: v for (s, k), v in updates.items() if s == section_name and v is not None}
        sections[section_name] = dataclasses.replace(section, **fields) if fields else section
    return dataclasses.replace(config, **sections)


@click.group()
def main():
    """Online parameter estimation in state-space models (sampled-smoother
    and quadratic-baseline recursive maximum likelihood)."""


@main.command()
@click.option("--config", "config_path", required=True, help="YAML config file or preset name.")
@click.option("--seed", type=int, default=None, help="Override experiment.seed.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Override experiment.out.")
def simulate(config_path, seed, out_dir):
    """Simulate a data set and write data.csv plus a metadata sidecar."""
    config = _load(config_path)
    config = _override(config, {("experiment", "seed"): seed,
                                ("experiment", "out"): out_dir})
    path = experiments.simulate_dataset(config, config.experiment.out)
    click.echo(f"wrote {path} ({config.experiment.n_observations} rows)")


@main.command()
@click.option("--config", "config_path", required=True, help="YAML config file or preset name.")
@click.option("--data", "data_path", type=click.Path(exists=True), default=None,
              help="Observation CSV (overrides experiment.data).")
@click.option("--seed", type=int, default=None, help="Override experiment.seed.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Override experiment.out.")
@click.option("--algorithm", type=click.Choice(["paris", "quadratic"]), default=None,
              help="Override algorithm.name.")
@click.option("--replicates", type=int, default=None, help="Override experiment.replicates.")
@click.option("--workers", type=int, default=None, help="Override experiment.workers.")
@click.option("--paper-fidelity", is_flag=True, default=False,
              help="Published-algorithm mode: no score-normalizer guard and no "
                   "transition gradient in the first score summand.")
@click.option("--diagnostics", is_flag=True, default=False,
              help="Also write per-step diagnostics CSVs.")
def run(config_path, data_path, seed, out_dir, algorithm, replicates, workers,
        paper_fidelity, diagnostics):
    """Run replicated online estimation on a shared data set."""
    config = _load(config_path)
    config = _override(
        config,
        {("experiment", "seed"): seed,
         ("experiment", "out"): out_dir,
         ("experiment", "data"): data_path,
         ("experiment", "replicates"): replicates,
         ("experiment", "workers"): workers,
         ("algorithm", "name"): algorithm,
         ("algorithm", "paper_fidelity"): paper_fidelity or None,
         ("experiment", "diagnostics"): diagnostics or None})
    if config.experiment.data is None:
        raise click.ClickException("experiment.data: no observation file configured; "
                                   "pass --data or set it in the config")
    data = dataio.read_data_csv(config.experiment.data)
    out = Path(config.experiment.out)
    index = experiments.run_experiment(config, data["y"], out)
    failed = [e for e in index["replicates"] if e["error"] is not None]
    for e in index["replicates"]:
        status = e["error"] or f"final theta {np.round(e['final_theta'], 4).tolist()}"
        click.echo(f"replicate {e['replicate']}: {status}")
    click.echo(f"wrote {out / experiments.INDEX_NAME}")
    if failed:
        raise click.ClickException(f"{len(failed)} replicate(s) failed")


@main.command()
@click.option("--n-grid", default="1000,2000,4000,8000",
              help="Comma-separated particle counts (>= 3 values).")
@click.option("--seed", type=int, default=0)
@click.option("--n-tilde", type=int, default=2)
@click.option("--min-time", type=float, default=0.25,
              help="Minimum measured seconds per grid point (repetitions auto-grow).")
@click.option("--out", "out_dir", type=click.Path(), default="out", help="Output directory.")
@click.option("--stability-probe", is_flag=True, default=False,
              help="Also record the tangent-statistic variance growth probe.")
def benchmark(n_grid, seed, n_tilde, min_time, out_dir, stability_probe):
    """Time both tangent updates over a particle grid and fit scaling exponents."""
    try:
        grid = [int(v) for v in n_grid.split(",") if v.strip()]
    except ValueError:
        raise click.ClickException(f"--n-grid: expected comma-separated integers, got {n_grid!r}")
    if len(grid) < 3:
        raise click.ClickException("--n-grid: need at least 3 particle counts")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = bench.run_benchmark(grid, seed=seed, n_tilde=n_tilde, min_total_s=min_time)
    payload = report.to_dict()
    if stability_probe:
        payload["stability_probe"] = bench.stability_probe(seed=seed, n_tilde=n_tilde)
    dataio.write_json(out / "benchmark.json", payload)
    plots.save_benchmark_figure(report, out / "scaling.png")
    for algorithm, exponent in report.exponents.items():
        click.echo(f"{algorithm}: fitted exponent {exponent:.3f}")
    click.echo(f"wrote {out / 'benchmark.json'} and {out / 'scaling.png'}")


@main.command("oracle-check")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", type=click.Path(), default="out", help="Output directory.")
def oracle_check(seed, out_dir):
    """Run every oracle agreement check; nonzero exit on any failure."""
    results = checks.run_all_checks(seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataio.write_json(out / "oracle_check.json", checks.report_dict(results, seed))
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        click.echo(f"{r.name:<{width}}  {status}  metric={r.metric:.3e}  tol={r.tolerance:.3e}")
    click.echo(f"wrote {out / 'oracle_check.json'}")
    if not all(r.passed for r in results):
        sys.exit(1)


@main.command()
@click.option("--index", "index_path", type=click.Path(exists=True), required=True,
              help="index.json produced by `run`.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Output directory (default: next to the index).")
def summarize(index_path, out_dir):
    """Summarize final estimates across replicates and render trajectory figures."""
    index_path = Path(index_path)
    out = Path(out_dir) if out_dir else index_path.parent
    out.mkdir(parents=True, exist_ok=True)
    index = dataio.read_json(index_path)
    summary = experiments.write_summary(index, out)
    trajectories = {}
    for entry in index["replicates"]:
        if entry.get("trajectory"):
            traj_path = index_path.parent / entry["trajectory"]
            if traj_path.exists():
                trajectories[entry["replicate"]] = dataio.read_trajectory_csv(traj_path)
    if trajectories:
        theta_star = index["config"].get("model", {}).get("theta_star")
        algo = index["config"].get("algorithm", {}).get("name", "")
        plots.save_trajectory_figure(trajectories, out / "trajectories.png",
                                     theta_star=theta_star,
                                     title=f"learning trajectories ({algo})")
    for name, var in summary.get("final_variance", {}).items():
        click.echo(f"final variance {name}: {var:.6e}")
    click.echo(f"wrote {out / 'summary.json'}, {out / 'summary.csv'}"
               + (f", {out / 'trajectories.png'}" if trajectories else ""))


if __name__ == "__main__":
    main()
