"""Command-line harness: preset or config-driven runs emitting CSV + manifest.

    cavity-adapt equilibria --preset fig2a --out OUT
    cavity-adapt run        --preset fig4  --seed 7 --out OUT
    cavity-adapt ensemble   --preset fig6desk --runs 5 --out OUT

A --config FILE is merged over the preset (config wins); --seed overrides
the document seed. Every command writes a manifest.json last; exit status is
0 iff the manifest was written. Failures emit one JSON object on stderr.
`CAVITY_ADAPT_THREADS` caps ensemble parallelism (default: sequential).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np

import cavity_adapt
from cavity_adapt.dynamics import IntegratorOptions, NoiseOptions, run_trajectory
from cavity_adapt.equilibria import find_equilibria, landscape
from cavity_adapt.model import ConfigError, Trajectory, build_system, validate_config
from cavity_adapt.output import (
    ManifestWriter,
    write_equilibria_csv,
    write_events_csv,
    write_landscape_csv,
    write_trajectory_csv,
)
from cavity_adapt.presets import load_preset


def _deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    if not args.preset and not args.config:
        raise ConfigError("provide --preset and/or --config")
    doc: dict[str, Any] = {}
    if args.preset:
        doc = load_preset(args.preset)
    if args.config:
        with open(args.config) as fh:
            user = json.load(fh)
        doc = _deep_merge(doc, user) if doc else user
    if args.seed is not None:
        doc["seed"] = args.seed
    return validate_config(doc)


def _run_seed(master_seed: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def _switch_intensities(traj: Trajectory) -> np.ndarray:
    """P_tot at each stationarity point: the samples taken at switch events
    (the pre-switch state) plus the terminal sample."""
    values = []
    for t, _ in traj.events[1:]:
        i = int(np.searchsorted(traj.times, t))
        if i < traj.times.size and abs(traj.times[i] - t) <= 1e-9 * max(1.0, abs(t)):
            values.append(float(traj.p_tot[i]))
    values.append(float(traj.p_tot[-1]))
    return np.array(values)


def _decile_mean(values: np.ndarray, last: bool) -> float:
    k = max(1, values.size // 10)
    chunk = values[-k:] if last else values[:k]
    return float(chunk.mean())


def cmd_equilibria(cfg: dict[str, Any], out_dir: Path, args: argparse.Namespace) -> int:
    params, _, schedule = build_system(cfg)
    if params.n_particles > 4:
        raise ConfigError("equilibria enumeration requires n_particles <= 4")
    pattern = schedule.patterns[0]
    resolution = args.resolution or (100 if params.n_particles <= 2 else 24)

    writer = ManifestWriter(out_dir, cfg, cfg["seed"], cavity_adapt.__version__)
    equilibria = find_equilibria(pattern, params, resolution=resolution)
    write_equilibria_csv(writer.register(out_dir / "equilibria.csv"), equilibria)
    if params.n_particles <= 2:
        grid = landscape(pattern, params, resolution=args.landscape_resolution)
        write_landscape_csv(writer.register(out_dir / "landscape.csv"), grid)
    writer.write(
        extra={
            "stable_count": sum(e.classification == "stable" for e in equilibria),
            "total_count": len(equilibria),
        }
    )
    return 0


def cmd_run(cfg: dict[str, Any], out_dir: Path, args: argparse.Namespace) -> int:
    params, state, schedule = build_system(cfg)
    integrator = IntegratorOptions.from_config(cfg["integrator"])
    noise = NoiseOptions.from_config(cfg["noise"])
    writer = ManifestWriter(out_dir, cfg, cfg["seed"], cavity_adapt.__version__)
    try:
        traj = run_trajectory(state, schedule, params, integrator, noise, seed=cfg["seed"])
        write_trajectory_csv(writer.register(out_dir / "trajectory.csv"), traj)
        write_events_csv(writer.register(out_dir / "events.csv"), traj)
    except Exception:
        writer.cleanup_partial()
        raise
    writer.write(extra={"samples": traj.n_samples, "events": len(traj.events)})
    return 0


def _ensemble_worker(worker_args: tuple[dict[str, Any], str, int]) -> dict[str, Any]:
    cfg, out_dir, index = worker_args
    out = Path(out_dir)
    params, state, schedule = build_system(cfg)
    integrator = IntegratorOptions.from_config(cfg["integrator"])
    noise = NoiseOptions.from_config(cfg["noise"])
    traj = run_trajectory(state, schedule, params, integrator, noise, seed=cfg["seed"])
    prefix = f"run_{index:03d}"
    write_trajectory_csv(out / f"{prefix}_trajectory.csv", traj)
    write_events_csv(out / f"{prefix}_events.csv", traj)
    switch_p = _switch_intensities(traj)
    return {
        "index": index,
        "seed": cfg["seed"],
        "files": [f"{prefix}_trajectory.csv", f"{prefix}_events.csv"],
        "final_P_tot": float(traj.p_tot[-1]),
        "final_Theta_tot": float(traj.theta_tot[-1]),
        "final_N0": int(traj.n0[-1]),
        "first_decile_P_tot": _decile_mean(switch_p, last=False),
        "last_decile_P_tot": _decile_mean(switch_p, last=True),
        "switch_count": len(traj.events),
    }


def cmd_ensemble(cfg: dict[str, Any], out_dir: Path, args: argparse.Namespace) -> int:
    n_runs = args.runs
    if n_runs < 1:
        raise ConfigError("--runs must be >= 1")
    master_seed = cfg["seed"]
    jobs = []
    for i in range(n_runs):
        run_cfg = json.loads(json.dumps(cfg))
        run_cfg["seed"] = _run_seed(master_seed, i)
        jobs.append((run_cfg, str(out_dir), i))

    threads = int(os.environ.get("CAVITY_ADAPT_THREADS", "1"))
    writer = ManifestWriter(out_dir, cfg, master_seed, cavity_adapt.__version__)
    results: list[dict[str, Any]] = []
    failures: list[Exception] = []
    if threads > 1 and n_runs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(threads, n_runs)) as pool:
            futures = [pool.submit(_ensemble_worker, job) for job in jobs]
            for fut in futures:
                try:
                    results.append(fut.result())
                except Exception as exc:
                    failures.append(exc)
    else:
        for job in jobs:
            try:
                results.append(_ensemble_worker(job))
            except Exception as exc:
                failures.append(exc)

    results.sort(key=lambda r: r["index"])
    if failures:
        # completed-run files are retained and listed in a partial sidecar;
        # manifest.json itself marks completion and is not written
        partial = {
            "partial": True,
            "completed": [r["index"] for r in results],
            "outputs": [f for r in results for f in r["files"]],
        }
        with open(out_dir / "manifest.partial.json", "w") as fh:
            json.dump(partial, fh, indent=2, sort_keys=True)
            fh.write("\n")
        raise failures[0]
    for res in results:
        for name in res.pop("files"):
            writer.register(out_dir / name)

    def stats(key: str) -> dict[str, float]:
        vals = np.array([r[key] for r in results], dtype=float)
        return {"mean": float(vals.mean()), "std": float(vals.std(ddof=0))}

    summary = {
        "master_seed": master_seed,
        "runs": n_runs,
        "final": {
            "P_tot": stats("final_P_tot"),
            "Theta_tot": stats("final_Theta_tot"),
            "N0": stats("final_N0"),
        },
        "per_run": results,
    }
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    writer.register(summary_path)
    writer.write(extra={"runs": n_runs})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavity-adapt",
        description="Adaptive multifrequency self-ordering: equilibria and trajectory runs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("equilibria", cmd_equilibria), ("run", cmd_run), ("ensemble", cmd_ensemble)):
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--preset", type=str, default=None, help="named preset, e.g. fig2a")
        p.add_argument("--seed", type=int, default=None, help="override the document seed")
        p.add_argument("--out", type=str, default="out", help="output directory")
        p.set_defaults(func=fn)
        if name == "equilibria":
            p.add_argument("--resolution", type=int, default=None,
                           help="grid resolution for equilibrium seeding")
            p.add_argument("--landscape-resolution", type=int, default=200)
        if name == "ensemble":
            p.add_argument("--runs", type=int, default=1, help="number of seeded runs")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        return args.func(cfg, out_dir, args)
    except Exception as exc:  # fail with machine-readable diagnostics
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
