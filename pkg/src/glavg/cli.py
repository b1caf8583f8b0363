"""Command-line entry points.

Subcommands: simulate | frozen | fbar | averaged | converge | delta-sweep
| galerkin | validate | rerun.  Every run resolves its configuration from
(in increasing precedence) defaults, the --config file, GLAVG_* environment
variables and command-line flags, then writes its outputs plus a manifest
into the output directory.

Exit codes: 0 success, 1 configuration or validation failure, 2 abort due
to flagged (blown-up) paths.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .averaging import (
    AveragingError,
    FrozenConfig,
    estimate_fbar,
    simulate_averaged,
    simulate_frozen,
)
from .config import ConfigError, SystemConfig, parse_config, require_valid
from .experiments import (
    StudyAbort,
    convergence_study,
    delta_sweep,
    galerkin_study,
    validate_properties,
)
from .io import RunManifest, load_manifest, manifest_to_config, write_table, write_trajectory
from .sim import khasminskii_pair, simulate_pair

ENV_PREFIX = "GLAVG_"


def _env(name: str) -> str | None:
    return os.environ.get(ENV_PREFIX + name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glavg",
        description=(
            "Slow-fast stochastic Ginzburg-Landau simulator with ergodic "
            "drift averaging (environment overrides use the GLAVG_ prefix)"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate", "one path of the coupled slow-fast pair"),
        ("frozen", "one path of the frozen fast equation"),
        ("fbar", "ergodic estimate of the averaged drift at the initial state"),
        ("averaged", "one path of the averaged slow equation"),
        ("converge", "epsilon sweep of sup-norm errors against the averaged path"),
        ("delta-sweep", "block-freezing discrepancy sweep over delta"),
        ("galerkin", "mode-refinement study with shared low-mode noise"),
        ("validate", "run the property-validation report"),
        ("rerun", "repeat a run from its manifest"),
    ]:
        p = sub.add_parser(name, help=help_text)
        if name == "rerun":
            p.add_argument("manifest", help="path to a manifest.json")
        p.add_argument("--config", default=None, help="config file (key=value or JSON)")
        p.add_argument("--seed", type=int, default=None, help="master seed (u64)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--paths", type=int, default=None, help="Monte-Carlo path count")
        p.add_argument("--quiet", action="store_true", default=None)
        p.add_argument(
            "--fbar-mode",
            choices=["exact", "nested", "tabulated"],
            default=None,
            help="averaged-drift mode for averaged/converge",
        )
    return parser


def _resolve(args) -> tuple[SystemConfig, dict, str, bool]:
    config_path = args.config or _env("CONFIG")
    if config_path:
        cfg, experiment = parse_config(config_path)
    else:
        cfg, experiment = SystemConfig(), {}
    seed = args.seed if args.seed is not None else _env("SEED")
    if seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=int(seed))
    paths = args.paths if args.paths is not None else _env("PATHS")
    if paths is not None:
        experiment["n_paths"] = int(paths)
    if getattr(args, "fbar_mode", None):
        experiment["fbar_mode"] = args.fbar_mode
    out = args.out or _env("OUT") or "glavg_out"
    quiet = bool(args.quiet) if args.quiet is not None else bool(_env("QUIET"))
    return cfg.resolved(), experiment, out, quiet


def _say(quiet: bool, *parts):
    if not quiet:
        print(*parts)


def _frozen_cfg(cfg: SystemConfig, experiment: dict) -> FrozenConfig:
    kwargs = {}
    if "t_burn" in experiment:
        kwargs["t_burn"] = float(experiment["t_burn"])
    if "t_avg" in experiment:
        kwargs["t_avg"] = float(experiment["t_avg"])
    if "dt_frozen" in experiment:
        kwargs["dt"] = float(experiment["dt_frozen"])
    return FrozenConfig(system=cfg, **kwargs)


def _refresh_steps(cfg: SystemConfig, experiment: dict) -> int | None:
    if "fbar_refresh" in experiment:
        return max(1, int(round(float(experiment["fbar_refresh"]) / cfg.dt)))
    return None


def run_command(command: str, cfg: SystemConfig, experiment: dict, out: str, quiet: bool) -> int:
    os.makedirs(out, exist_ok=True)
    cfg = require_valid(cfg)
    manifest = RunManifest.for_run(command, cfg, experiment)
    manifest_name = "manifest.json"
    outputs: list[str] = []
    status = 0

    if command == "simulate":
        res = simulate_pair(cfg)
        for traj, fname in ((res.x, "trajectory_x.csv"), (res.y, "trajectory_y.csv")):
            path = os.path.join(out, fname)
            write_trajectory(traj, path, manifest_name)
            outputs.append(path)
        if res.blow_step >= 0:
            manifest.n_flagged = 1
            _say(quiet, f"path blew up at t={res.blow_time:g}; output flagged")
            status = 2
        _say(quiet, f"wrote {', '.join(os.path.basename(p) for p in outputs)}")

    elif command == "frozen":
        fcfg = _frozen_cfg(cfg, experiment)
        T = fcfg.t_burn + fcfg.t_avg
        traj = simulate_frozen(cfg.x0_coeffs(), cfg.y0_coeffs(), fcfg, T)
        path = os.path.join(out, "trajectory_yfrozen.csv")
        write_trajectory(traj, path, manifest_name)
        outputs.append(path)
        _say(quiet, f"wrote {os.path.basename(path)} (T={T:g})")

    elif command == "fbar":
        fcfg = _frozen_cfg(cfg, experiment)
        est = estimate_fbar(cfg.x0_coeffs(), fcfg)
        rows = []
        m = cfg.m
        labels = [f"c{k}" for k in range(1, m + 1)] + [f"s{k}" for k in range(1, m + 1)]
        se = est.batch_means.std(axis=0, ddof=1) / math.sqrt(est.batch_means.shape[0])
        for i, lab in enumerate(labels):
            rows.append({"mode": lab, "value": est.value[i], "batch_se": se[i]})
        path = os.path.join(out, "fbar.csv")
        write_table(rows, path, manifest_name)
        outputs.append(path)
        _say(
            quiet,
            f"fbar norm {np.linalg.norm(est.value):.6g}, spread {est.spread:.3g}"
            + (" [low confidence]" if est.low_confidence else ""),
        )

    elif command == "averaged":
        mode = experiment.get("fbar_mode", "nested")
        traj = simulate_averaged(
            cfg,
            fbar_mode=mode,
            fcfg=_frozen_cfg(cfg, experiment) if mode == "nested" else None,
            refresh_steps=_refresh_steps(cfg, experiment),
        )
        path = os.path.join(out, "trajectory_xbar.csv")
        write_trajectory(traj, path, manifest_name)
        outputs.append(path)
        _say(quiet, f"wrote {os.path.basename(path)} (fbar_mode={mode})")

    elif command == "converge":
        eps_grid = experiment.get("eps_grid", [0.1, 0.02, 0.004, 0.0008])
        n_paths = experiment.get("n_paths", 200)
        mode = experiment.get("fbar_mode", "nested")
        table = convergence_study(
            cfg,
            eps_grid,
            n_paths,
            fbar_mode=mode,
            fcfg=_frozen_cfg(cfg, experiment) if mode == "nested" else None,
            refresh_steps=_refresh_steps(cfg, experiment),
        )
        manifest.n_flagged = int(sum(r["n_flagged"] for r in table.rows))
        path = os.path.join(out, "convergence.csv")
        write_table(table.rows, path, manifest_name)
        outputs.append(path)
        for row in table.rows:
            _say(quiet, f"eps={row['eps']:g}: median_err={row['median_err']:.6g}")

    elif command == "delta-sweep":
        delta_grid = experiment.get("delta_grid", [0.2, 0.1, 0.05, 0.025])
        n_paths = experiment.get("n_paths", 100)
        table = delta_sweep(cfg, delta_grid, n_paths)
        manifest.n_flagged = int(sum(r["n_flagged"] for r in table.rows))
        rows = [dict(r, loglog_slope_y=table.slope_y) for r in table.rows]
        path = os.path.join(out, "delta_sweep.csv")
        write_table(rows, path, manifest_name)
        outputs.append(path)
        _say(quiet, f"fitted log-log slope of the Y discrepancy: {table.slope_y:.3f}")

    elif command == "galerkin":
        m_grid = experiment.get("m_grid", [8, 16, 32, 64])
        n_paths = experiment.get("n_paths", 16)
        table = galerkin_study(cfg, m_grid, n_paths)
        manifest.n_flagged = int(sum(r["n_flagged"] for r in table.rows))
        path = os.path.join(out, "galerkin.csv")
        write_table(table.rows, path, manifest_name)
        outputs.append(path)
        for row in table.rows:
            _say(quiet, f"m={row['m']}: median ||X^m - X^2m|| = {row['median_diff']:.6g}")

    elif command == "validate":
        report = validate_properties(cfg)
        path = os.path.join(out, "validation.txt")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(report.lines()) + "\n")
        outputs.append(path)
        for line in report.lines():
            _say(quiet, line)
        if not report.passed:
            status = 1

    else:
        raise ConfigError(f"unknown command {command!r}")

    for path in outputs:
        manifest.add_output(path)
    manifest.write(os.path.join(out, manifest_name))
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "rerun":
            doc = load_manifest(args.manifest)
            cfg, experiment = manifest_to_config(doc)
            out = args.out or _env("OUT") or "glavg_rerun"
            quiet = bool(args.quiet) if args.quiet is not None else bool(_env("QUIET"))
            return run_command(doc["command"], cfg, experiment, out, quiet)
        cfg, experiment, out, quiet = _resolve(args)
        return run_command(args.command, cfg, experiment, out, quiet)
    except (ConfigError, AveragingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StudyAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
