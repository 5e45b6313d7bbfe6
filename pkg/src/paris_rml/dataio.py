"""CSV and JSON artifacts with byte-reproducible formatting.

Every file embeds the config hash and seed (CSV: a single leading
comment line; JSON: top-level fields).  Floats are written with %.17g so
values round-trip exactly; identical configurations therefore produce
byte-identical files.
"""

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

TRAJECTORY_COLUMNS = ("t", "phi", "sigma2", "beta2",
                      "zeta_phi", "zeta_sigma2", "zeta_beta2", "t3", "degenerate")
DIAGNOSTIC_COLUMNS = ("t", "ess", "weight_total",
                      "tau_bar_phi", "tau_bar_sigma2", "tau_bar_beta2",
                      "proposals_per_draw", "fallback_fraction")


def fmt(x) -> str:
    """Deterministic, round-trip-exact float formatting."""
    return format(float(x), ".17g")


def stamp_line(config_hash: str, seed: int) -> str:
    return f"# config_hash={config_hash} seed={seed}"


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_data_csv(path, observations, states=None, meta=None) -> Path:
    """Write simulated data as (t, y[, x]) rows plus a JSON metadata sidecar."""
    path = Path(path)
    ys = np.asarray(observations, dtype=float)
    with path.open("w", newline="") as fh:
        if meta:
            fh.write(stamp_line(meta.get("config_hash", ""), meta.get("seed", 0)) + "\n")
        fh.write("t,y" + (",x" if states is not None else "") + "\n")
        for t, y in enumerate(ys):
            row = f"{t},{fmt(y)}"
            if states is not None:
                row += f",{fmt(states[t])}"
            fh.write(row + "\n")
    if meta is not None:
        write_json(path.with_suffix(".meta.json"), meta)
    return path


def read_data_csv(path) -> dict:
    """Read a data CSV; returns {'t': ..., 'y': ..., 'x': optional}."""
    rows = []
    header = None
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(line.split(","))
    if header is None or "y" not in header:
        raise ValueError(f"{path}: expected a header row containing a 'y' column")
    arr = np.asarray(rows, dtype=float)
    out = {name: arr[:, j] for j, name in enumerate(header)}
    out["t"] = out["t"].astype(int)
    return out


class TrajectoryWriter:
    """Streams StepRecords to a trajectory CSV (constant memory)."""

    def __init__(self, path, config_hash: str, seed: int,
                 diagnostics_path=None):
        self.path = Path(path)
        self._fh = self.path.open("w", newline="")
        self._fh.write(stamp_line(config_hash, seed) + "\n")
        self._fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        self._diag = None
        if diagnostics_path is not None:
            self._diag = Path(diagnostics_path).open("w", newline="")
            self._diag.write(stamp_line(config_hash, seed) + "\n")
            self._diag.write(",".join(DIAGNOSTIC_COLUMNS) + "\n")

    def write(self, rec) -> None:
        th, z = rec.theta, rec.zeta
        self._fh.write(
            f"{rec.t},{fmt(th[0])},{fmt(th[1])},{fmt(th[2])},"
            f"{fmt(z[0])},{fmt(z[1])},{fmt(z[2])},{fmt(rec.t3)},{int(rec.degenerate)}\n")
        if self._diag is not None:
            tb = rec.tau_bar
            self._diag.write(
                f"{rec.t},{fmt(rec.ess)},{fmt(rec.weight_total)},"
                f"{fmt(tb[0])},{fmt(tb[1])},{fmt(tb[2])},"
                f"{fmt(rec.proposals_per_draw)},{fmt(rec.fallback_fraction)}\n")

    def close(self) -> None:
        self._fh.close()
        if self._diag is not None:
            self._diag.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trajectory_csv(path) -> dict:
    """Read a trajectory CSV into column arrays keyed by header name."""
    with Path(path).open() as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader)
        rows = list(reader)
    arr = np.asarray(rows, dtype=float) if rows else np.empty((0, len(header)))
    out = {name: arr[:, j] for j, name in enumerate(header)}
    out["t"] = out["t"].astype(int) if rows else np.empty(0, dtype=int)
    if "degenerate" in out:
        out["degenerate"] = out["degenerate"].astype(bool)
    return out
