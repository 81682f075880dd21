#!/usr/bin/env python3
"""Batch figure rendering for cavity-adapt CSV outputs.

    render.py --kind landscape2d --in landscape.csv [equilibria.csv] --out fig.png
    render.py --kind spheres3d   --in equilibria.csv --out fig.png
    render.py --kind timeseries  --in trajectory.csv --out fig.png
    render.py --kind positions_vs_time --in trajectory.csv --out fig.png
    [--style KEY=VAL ...]

Consumes the CSV column contract of the simulation CLI (x_1..x_N, P_tot,
I_n{order}, F_1..F_N for landscapes; t, x_*, P_tot, Theta_tot, N0 for
trajectories; classification and eig_re_* for equilibria). Inputs are read
only, never modified. Output is a raster image, deterministic for fixed
inputs and style.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

TWO_PI = 2.0 * math.pi

KINDS = ("landscape2d", "spheres3d", "timeseries", "positions_vs_time")


class MissingColumn(ValueError):
    def __init__(self, column: str, path: str):
        self.column = column
        super().__init__(f"missing column '{column}' in {path}")


def require_columns(frame: pd.DataFrame, columns: list[str], path: str) -> None:
    for col in columns:
        if col not in frame.columns:
            raise MissingColumn(col, path)


def parse_style(pairs: list[str]) -> dict[str, str]:
    style = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"style option {pair!r} is not KEY=VAL")
        key, val = pair.split("=", 1)
        style[key] = val
    return style


def rgb_mix(channels: np.ndarray) -> np.ndarray:
    """Map up to three per-mode intensity maps to RGB, normalized by the
    global maximum so equal intensities render gray/white."""
    m = channels.shape[0]
    if m > 3:
        channels = channels[:3]
        m = 3
    peak = float(channels.max())
    if peak <= 0:
        peak = 1.0
    rgb = np.zeros(channels.shape[1:] + (3,))
    for c in range(m):
        rgb[..., c] = channels[c] / peak
    if m == 1:
        rgb[..., 1] = rgb[..., 2] = rgb[..., 0]
    elif m == 2:
        rgb[..., 2] = 0.0
    return np.clip(rgb, 0.0, 1.0)


def _pivot_grid(frame: pd.DataFrame, value: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x1 = np.sort(frame["x_1"].unique())
    x2 = np.sort(frame["x_2"].unique())
    grid = frame.pivot_table(index="x_1", columns="x_2", values=value, sort=True).to_numpy()
    return x1, x2, grid


def plot_landscape2d(inputs: list[str], out: str, style: dict[str, str]) -> None:
    frame = pd.read_csv(inputs[0])
    require_columns(frame, ["x_1", "x_2", "P_tot"], inputs[0])
    mode_cols = [c for c in frame.columns if c.startswith("I_n")]
    use_rgb = style.get("rgb", "auto")
    mix = (use_rgb == "1") or (use_rgb == "auto" and len(mode_cols) >= 2)

    fig, ax = plt.subplots(figsize=(5.2, 4.6), dpi=int(style.get("dpi", "130")))
    extent = (0.0, TWO_PI, 0.0, TWO_PI)
    if mix and mode_cols:
        channels = np.stack([_pivot_grid(frame, c)[2] for c in mode_cols[:3]])
        ax.imshow(
            np.transpose(rgb_mix(channels), (1, 0, 2)),
            origin="lower", extent=extent, aspect="equal", interpolation="nearest",
        )
    else:
        x1, x2, grid = _pivot_grid(frame, "P_tot")
        im = ax.imshow(
            grid.T, origin="lower", extent=extent, aspect="equal",
            cmap=style.get("cmap", "viridis"), interpolation="nearest",
        )
        fig.colorbar(im, ax=ax, label="P_tot")
    if "F_1" in frame.columns and "F_2" in frame.columns and style.get("contours", "1") == "1":
        x1 = np.sort(frame["x_1"].unique())
        x2 = np.sort(frame["x_2"].unique())
        for comp, color in (("F_1", "0.7"), ("F_2", "0.85")):
            g = frame.pivot_table(index="x_1", columns="x_2", values=comp, sort=True).to_numpy()
            ax.contour(x1, x2, g.T, levels=[0.0], colors=color, linewidths=0.5)
    if len(inputs) > 1:
        eq = pd.read_csv(inputs[1])
        require_columns(eq, ["x_1", "x_2", "classification"], inputs[1])
        stable = eq[eq["classification"] == "stable"]
        ax.plot(stable["x_1"], stable["x_2"], "o", color="red", ms=4, mec="white", mew=0.4)
    ax.set_xlabel("k x_1")
    ax.set_ylabel("k x_2")
    ax.set_xlim(0, TWO_PI)
    ax.set_ylim(0, TWO_PI)
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


def plot_spheres3d(inputs: list[str], out: str, style: dict[str, str]) -> None:
    frame = pd.read_csv(inputs[0])
    require_columns(frame, ["x_1", "x_2", "x_3", "P_tot"], inputs[0])
    if "classification" in frame.columns:
        frame = frame[frame["classification"] == "stable"]
    fig = plt.figure(figsize=(5.4, 5.0), dpi=int(style.get("dpi", "130")))
    ax = fig.add_subplot(projection="3d")
    p = frame["P_tot"].to_numpy()
    peak = p.max() if len(p) and p.max() > 0 else 1.0
    sizes = 4.0 + 120.0 * (p / peak)
    sc = ax.scatter(
        frame["x_1"], frame["x_2"], frame["x_3"],
        s=sizes, c=p, cmap=style.get("cmap", "plasma"), depthshade=True,
    )
    fig.colorbar(sc, ax=ax, shrink=0.6, label="P_tot")
    ax.set_xlabel("k x_1")
    ax.set_ylabel("k x_2")
    ax.set_zlabel("k x_3")
    ax.set_xlim(0, TWO_PI)
    ax.set_ylim(0, TWO_PI)
    ax.set_zlim(0, TWO_PI)
    fig.savefig(out)
    plt.close(fig)


def _position_columns(frame: pd.DataFrame, path: str) -> list[str]:
    cols = sorted(
        (c for c in frame.columns if c.startswith("x_")),
        key=lambda c: int(c.split("_")[1]),
    )
    if not cols:
        raise MissingColumn("x_1", path)
    return cols


def plot_timeseries(inputs: list[str], out: str, style: dict[str, str]) -> None:
    frame = pd.read_csv(inputs[0])
    require_columns(frame, ["t", "P_tot", "Theta_tot", "N0"], inputs[0])
    if len(frame) == 0:
        raise ValueError(f"no samples in {inputs[0]}")
    xcols = _position_columns(frame, inputs[0])
    t = frame["t"].to_numpy()
    fig, axes = plt.subplots(
        4, 1, figsize=(6.4, 7.6), dpi=int(style.get("dpi", "130")), sharex=True
    )
    for c in xcols:
        axes[0].plot(t, np.mod(frame[c].to_numpy(), TWO_PI), lw=0.4, color="k", alpha=0.5)
    axes[0].set_ylabel("k x mod 2pi")
    axes[1].plot(t, frame["P_tot"], lw=0.8, color="tab:orange")
    axes[1].set_ylabel("P_tot")
    axes[2].plot(t, frame["Theta_tot"], lw=0.8, color="tab:blue")
    axes[2].set_ylabel("Theta_tot")
    axes[3].plot(t, frame["N0"], lw=0.8, color="tab:green")
    axes[3].set_ylabel("N0")
    axes[3].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


def plot_positions_vs_time(inputs: list[str], out: str, style: dict[str, str]) -> None:
    frame = pd.read_csv(inputs[0])
    require_columns(frame, ["t", "P_tot"], inputs[0])
    if len(frame) == 0:
        raise ValueError(f"no samples in {inputs[0]}")
    xcols = _position_columns(frame, inputs[0])
    t = frame["t"].to_numpy()
    fig, axes = plt.subplots(
        2, 1, figsize=(6.4, 4.8), dpi=int(style.get("dpi", "130")), sharex=True
    )
    for c in xcols:
        axes[0].plot(t, np.mod(frame[c].to_numpy(), TWO_PI) / math.pi, ".", ms=1.0, color="k")
    axes[0].set_ylabel("k x / pi (mod 2)")
    axes[1].plot(t, frame["P_tot"], lw=0.8, color="tab:orange")
    axes[1].set_ylabel("P_tot")
    axes[1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


RENDERERS = {
    "landscape2d": plot_landscape2d,
    "spheres3d": plot_spheres3d,
    "timeseries": plot_timeseries,
    "positions_vs_time": plot_positions_vs_time,
}


def render(kind: str, inputs: list[str], out: str, style: dict[str, str] | None = None) -> str:
    if kind not in RENDERERS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    for path in inputs:
        if not Path(path).exists():
            raise FileNotFoundError(path)
    RENDERERS[kind](inputs, out, style or {})
    return out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="render.py", description=__doc__)
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--style", nargs="*", default=[])
    args = parser.parse_args(argv)
    try:
        render(args.kind, args.inputs, args.out, parse_style(args.style))
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
