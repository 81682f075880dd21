"""CSV and manifest writers.

CSV contract: comma separator, one header row, '.' decimal separator,
floats at 17 significant digits (round-trip exact), so repeated runs with
identical config and seed produce byte-identical files.
"""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from cavity_adapt.equilibria import LandscapeGrid
from cavity_adapt.model import Equilibrium, Trajectory


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    """Columns: t, x_1..x_N, p_1..p_N, P_tot, Theta_tot, N0, N0_pairs, pattern_id."""
    n = traj.positions.shape[1]
    header = (
        ["t"]
        + [f"x_{j + 1}" for j in range(n)]
        + [f"p_{j + 1}" for j in range(n)]
        + ["P_tot", "Theta_tot", "N0", "N0_pairs", "pattern_id"]
    )
    event_times = [t for t, _ in traj.events]
    event_names = [name for _, name in traj.events]

    def rows():
        for i, t in enumerate(traj.times):
            k = int(np.searchsorted(event_times, t, side="right")) - 1
            pattern_id = event_names[max(k, 0)]
            yield (
                [fmt(t)]
                + [fmt(v) for v in traj.positions[i]]
                + [fmt(v) for v in traj.momenta[i]]
                + [fmt(traj.p_tot[i]), fmt(traj.theta_tot[i]),
                   str(int(traj.n0[i])), str(int(traj.n0_pairs[i])), pattern_id]
            )

    _write_rows(path, header, rows())


def write_events_csv(path: Path, traj: Trajectory) -> None:
    _write_rows(path, ["t", "pattern_id"], ([fmt(t), name] for t, name in traj.events))


def write_equilibria_csv(path: Path, equilibria: Sequence[Equilibrium]) -> None:
    """Columns: x_1..x_N, classification, P_tot, eig_re_1..eig_re_N."""
    if not equilibria:
        _write_rows(path, ["x_1", "classification", "P_tot", "eig_re_1"], [])
        return
    n = equilibria[0].positions.size
    header = (
        [f"x_{j + 1}" for j in range(n)]
        + ["classification", "P_tot"]
        + [f"eig_re_{j + 1}" for j in range(n)]
    )
    rows = (
        [fmt(v) for v in eq.positions]
        + [eq.classification, fmt(eq.intensity)]
        + [fmt(v) for v in eq.eigen_real_parts]
        for eq in equilibria
    )
    _write_rows(path, header, rows)


def write_landscape_csv(path: Path, grid: LandscapeGrid) -> None:
    """Columns: x_1..x_N, P_tot, I_n{order}..., F_1..F_N (flattened grid)."""
    n = grid.n_particles
    res = grid.resolution
    header = (
        [f"x_{j + 1}" for j in range(n)]
        + ["P_tot"]
        + [f"I_n{order}" for order in grid.mode_orders]
        + [f"F_{j + 1}" for j in range(n)]
    )
    mesh = np.meshgrid(*([grid.axis] * n), indexing="ij")
    coords = [m.reshape(-1) for m in mesh]
    p_flat = grid.p_tot.reshape(-1)
    mode_flat = grid.mode_intensity.reshape(len(grid.mode_orders), -1)
    force_flat = grid.force.reshape(n, -1)

    def rows():
        for i in range(res**n):
            yield (
                [fmt(c[i]) for c in coords]
                + [fmt(p_flat[i])]
                + [fmt(mode_flat[m, i]) for m in range(len(grid.mode_orders))]
                + [fmt(force_flat[j, i]) for j in range(n)]
            )

    _write_rows(path, header, rows())


class ManifestWriter:
    """Collects output files and writes the manifest last, as the run's
    completion marker."""

    def __init__(self, out_dir: Path, config: dict[str, Any], seed: int, version: str):
        self.out_dir = Path(out_dir)
        self.config = config
        self.seed = int(seed)
        self.version = version
        self.outputs: list[str] = []
        self._t0 = time.monotonic()

    def register(self, path: Path) -> Path:
        rel = str(Path(path).relative_to(self.out_dir))
        if rel not in self.outputs:
            self.outputs.append(rel)
        return Path(path)

    def cleanup_partial(self) -> None:
        for rel in self.outputs:
            try:
                (self.out_dir / rel).unlink(missing_ok=True)
            except OSError:
                pass

    def write(self, extra: dict[str, Any] | None = None) -> Path:
        manifest = {
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "outputs": self.outputs,
            "duration_s": time.monotonic() - self._t0,
        }
        if extra:
            manifest.update(extra)
        path = self.out_dir / "manifest.json"
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path
