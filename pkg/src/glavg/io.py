"""Persistence: trajectory and table CSV files, JSONL snapshots, manifests.

Floats are serialized with 17 significant digits, which round-trips IEEE
doubles exactly, so reading a file back reproduces the in-memory values
bit for bit.  Every data file carries a comment line naming its manifest;
the manifest plus the code version reproduce the run byte-identically.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import os
import platform
from dataclasses import dataclass, field

import numpy as np

from . import __version__, backend
from .config import SystemConfig
from .sim import Trajectory
from .stable import KIND_L, KIND_Z, KIND_ZBAR, stream_seed


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _coeff_headers(m: int) -> list[str]:
    return [f"c{k}" for k in range(1, m + 1)] + [f"s{k}" for k in range(1, m + 1)]


def write_trajectory(traj: Trajectory, path: str, manifest_name: str | None = None):
    """CSV with a time column and one column per coefficient (c1..cm, s1..sm)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if manifest_name:
            fh.write(f"# manifest: {manifest_name}\n")
        writer = csv.writer(fh)
        writer.writerow(["t"] + _coeff_headers(traj.m))
        for t, row in zip(traj.times, traj.coeffs):
            writer.writerow([fmt(t)] + [fmt(v) for v in row])


def read_trajectory(path: str, label: str = "X") -> Trajectory:
    with open(path, "r", encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader)
    m = (len(header) - 1) // 2
    times, coeffs = [], []
    for row in reader:
        times.append(float(row[0]))
        coeffs.append([float(v) for v in row[1:]])
    return Trajectory(np.asarray(times), np.asarray(coeffs), label, m)


def write_trajectory_jsonl(traj: Trajectory, path: str, manifest_name: str | None = None):
    """One snapshot object per line; convenient for streaming large runs."""
    with open(path, "w", encoding="utf-8") as fh:
        meta = {"kind": "trajectory", "label": traj.label, "m": traj.m}
        if manifest_name:
            meta["manifest"] = manifest_name
        fh.write(json.dumps(meta) + "\n")
        for t, row in zip(traj.times, traj.coeffs):
            fh.write(
                json.dumps({"t": float(t), "coeffs": [float(v) for v in row]})
                + "\n"
            )


def write_table(rows: list[dict], path: str, manifest_name: str | None = None):
    """CSV table, one row per dict; column order follows the first row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if manifest_name:
            fh.write(f"# manifest: {manifest_name}\n")
        writer = csv.writer(fh)
        if not rows:
            return
        headers = list(rows[0].keys())
        writer.writerow(headers)
        for row in rows:
            writer.writerow([fmt(row[h]) for h in headers])


def read_table(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    headers = next(reader)
    out = []
    for row in reader:
        rec = {}
        for key, raw in zip(headers, row):
            try:
                rec[key] = int(raw)
            except ValueError:
                try:
                    rec[key] = float(raw)
                except ValueError:
                    rec[key] = raw
        out.append(rec)
    return out


@dataclass
class RunManifest:
    """Everything needed to reproduce a run byte for byte (same software)."""

    command: str
    config: dict
    experiment: dict
    master_seed: int
    version: str = __version__
    kernel_policy: str = field(default_factory=lambda: backend.policy())
    numpy_version: str = np.__version__
    python_version: str = field(default_factory=platform.python_version)
    wall_clock_utc: str = field(
        default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat()
    )
    n_flagged: int = 0
    outputs: dict = field(default_factory=dict)  # filename -> sha256
    stream_seed_samples: dict = field(default_factory=dict)

    @staticmethod
    def for_run(command: str, cfg: SystemConfig, experiment: dict) -> "RunManifest":
        man = RunManifest(
            command=command,
            config=cfg.to_dict(),
            experiment=experiment,
            master_seed=cfg.seed,
        )
        # example derived seeds for independent verification of the splitter
        man.stream_seed_samples = {
            "L/path0/mode+1": f"{stream_seed(cfg.seed, KIND_L, 0, 1):#018x}",
            "Z/path0/mode-1": f"{stream_seed(cfg.seed, KIND_Z, 0, -1):#018x}",
            "Zbar/path0/mode+1": f"{stream_seed(cfg.seed, KIND_ZBAR, 0, 1):#018x}",
        }
        return man

    def add_output(self, path: str):
        with open(path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        self.outputs[os.path.basename(path)] = digest

    def write(self, path: str):
        doc = {
            "command": self.command,
            "version": self.version,
            "master_seed": self.master_seed,
            "kernel_policy": self.kernel_policy,
            "numpy_version": self.numpy_version,
            "python_version": self.python_version,
            "wall_clock_utc": self.wall_clock_utc,
            "n_flagged": self.n_flagged,
            "config": self.config,
            "experiment": self.experiment,
            "stream_seed_samples": self.stream_seed_samples,
            "outputs": self.outputs,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_manifest(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def manifest_to_config(doc: dict) -> tuple[SystemConfig, dict]:
    """Rebuild the resolved config and experiment params from a manifest."""
    return SystemConfig(**doc["config"]), dict(doc.get("experiment", {}))
