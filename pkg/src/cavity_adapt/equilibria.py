"""Zero-force configurations of the adiabatic system and their stability.

Equilibria of the overdamped flow dx/dt ~ F(x) are located by seeding Newton
iterations from grid cells where every force component changes sign (or is
already tiny), polishing to a force-norm tolerance, deduplicating modulo
2*pi translations and particle permutation, and classifying by the sign of
the real parts of the Jacobian eigenvalues.

Zero-field configurations (all pumped-mode sums vanishing) form genuine
degenerate manifolds of the force field; points polished onto them come out
``marginal`` or ``unstable`` and are reported alongside isolated equilibria.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from cavity_adapt.model import (
    CLASS_MARGINAL,
    CLASS_STABLE,
    CLASS_UNSTABLE,
    TWO_PI,
    Equilibrium,
    IlluminationPattern,
    SystemParams,
)
from cavity_adapt.optics import adiabatic_field, adiabatic_field_batch, adiabatic_force

TOL_FORCE = 1e-10
TOL_DEDUP = 1e-6 * TWO_PI
EPS_EIG = 1e-8


class DegenerateLandscape(RuntimeError):
    """The force field vanishes identically; no isolated equilibria exist."""


class NotAnEquilibrium(ValueError):
    """Stability was requested at a point with non-negligible force."""


@dataclass(frozen=True)
class LandscapeGrid:
    """Intensity and force channels sampled on a regular [0, 2*pi)^N grid."""

    axis: np.ndarray
    mode_orders: tuple[int, ...]
    mode_intensity: np.ndarray  # (M,) + (res,)*N
    p_tot: np.ndarray  # (res,)*N
    force: np.ndarray  # (N,) + (res,)*N

    @property
    def resolution(self) -> int:
        return self.axis.shape[0]

    @property
    def n_particles(self) -> int:
        return self.force.shape[0]


def canonical_positions(positions: np.ndarray) -> np.ndarray:
    """Representative modulo 2*pi translations of each particle and permutation."""
    return np.sort(np.mod(np.asarray(positions, dtype=float), TWO_PI))


def _circ_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.abs(a - b) % TWO_PI
    return np.minimum(d, TWO_PI - d)


def config_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max per-particle circular distance, minimized over particle pairings."""
    a = canonical_positions(a)
    b = canonical_positions(b)
    best = np.inf
    for perm in itertools.permutations(range(a.size)):
        best = min(best, float(_circ_dist(a, b[list(perm)]).max()))
    return best


def jacobian(
    positions: np.ndarray,
    pattern: IlluminationPattern,
    params: SystemParams,
    step: float = 1e-6,
) -> np.ndarray:
    """Central finite differences of the adiabatic force: J[i, j] = dF_i/dx_j."""
    if step <= 0:
        raise ValueError("step must be > 0")
    x = np.asarray(positions, dtype=float)
    n = x.size
    probes = np.repeat(x[None, :], 2 * n, axis=0)
    for j in range(n):
        probes[2 * j, j] += step
        probes[2 * j + 1, j] -= step
    forces = adiabatic_force(probes, pattern, params)
    jac = np.empty((n, n))
    for j in range(n):
        jac[:, j] = (forces[2 * j] - forces[2 * j + 1]) / (2.0 * step)
    return jac


def classify_eigenvalues(eigen_real_parts: np.ndarray, eps_eig: float = EPS_EIG) -> str:
    re = np.asarray(eigen_real_parts, dtype=float)
    if np.all(re < -eps_eig):
        return CLASS_STABLE
    if np.any(re > eps_eig):
        return CLASS_UNSTABLE
    return CLASS_MARGINAL


def stability(
    positions: np.ndarray,
    pattern: IlluminationPattern,
    params: SystemParams,
    eps_eig: float = EPS_EIG,
    force_tol: float = 1e-8,
    jacobian_step: float = 1e-6,
) -> str:
    """Classification at an equilibrium by the overdamped linearization."""
    f = adiabatic_force(positions, pattern, params)
    if f.size and float(np.abs(f).max()) > force_tol:
        raise NotAnEquilibrium(
            f"force norm {float(np.abs(f).max()):.3e} exceeds tolerance {force_tol:.3e}"
        )
    jac = jacobian(positions, pattern, params, step=jacobian_step)
    return classify_eigenvalues(np.linalg.eigvals(jac).real, eps_eig)


def _grid_forces(
    pattern: IlluminationPattern, params: SystemParams, resolution: int
) -> tuple[np.ndarray, np.ndarray]:
    n = params.n_particles
    axis = np.arange(resolution) * (TWO_PI / resolution)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    forces = adiabatic_force(points, pattern, params).reshape((resolution,) * n + (n,))
    return axis, forces


def _seed_cells(forces: np.ndarray, resolution: int, n: int) -> np.ndarray:
    """Centers of cells whose corners bracket zero in every force component."""
    corners = []
    corner_abs = None
    for offsets in itertools.product((0, 1), repeat=n):
        shifted = forces
        for axis_idx, off in enumerate(offsets):
            if off:
                shifted = np.roll(shifted, -1, axis=axis_idx)
        corners.append(shifted)
        a = np.abs(shifted).max(axis=-1)
        corner_abs = a if corner_abs is None else np.maximum(corner_abs, a)
    lo = np.minimum.reduce(corners)
    hi = np.maximum.reduce(corners)
    bracketed = np.all((lo <= 0.0) & (hi >= 0.0), axis=-1)
    f_ref = float(np.abs(forces).max())
    tiny = corner_abs < 1e-8 * max(f_ref, 1.0)
    idx = np.argwhere(bracketed | tiny)
    cell = TWO_PI / resolution
    return (idx + 0.5) * cell


def _jacobian_batch(
    x: np.ndarray, pattern: IlluminationPattern, params: SystemParams, step: float
) -> np.ndarray:
    """Stacked central-difference Jacobians for points of shape (K, N)."""
    k, n = x.shape
    jac = np.empty((k, n, n))
    for j in range(n):
        probe = x.copy()
        probe[:, j] += step
        f_plus = adiabatic_force(probe, pattern, params)
        probe[:, j] -= 2.0 * step
        f_minus = adiabatic_force(probe, pattern, params)
        jac[:, :, j] = (f_plus - f_minus) / (2.0 * step)
    return jac


def _newton_polish_batch(
    seeds: np.ndarray,
    pattern: IlluminationPattern,
    params: SystemParams,
    tol_force: float,
    jacobian_step: float,
    max_step: float,
    max_iter: int,
) -> np.ndarray:
    """Polish all seeds simultaneously; returns the converged points."""
    x = np.array(seeds, dtype=float)
    for _ in range(max_iter):
        f = adiabatic_force(x, pattern, params)
        active = np.abs(f).max(axis=-1) >= tol_force
        if not np.any(active):
            break
        xa = x[active]
        jac = _jacobian_batch(xa, pattern, params, jacobian_step)
        # pseudo-inverse: step only along non-null directions when the
        # Jacobian is singular (zero-field manifolds)
        delta = np.einsum("kij,kj->ki", np.linalg.pinv(jac, rcond=1e-10), f[active])
        norms = np.abs(delta).max(axis=-1, keepdims=True)
        scale = np.where(norms > max_step, max_step / np.maximum(norms, 1e-300), 1.0)
        x[active] = xa - delta * scale
    f = adiabatic_force(x, pattern, params)
    return x[np.abs(f).max(axis=-1) < tol_force]


def _dedup_canonical(points: list[np.ndarray], tol: float) -> list[np.ndarray]:
    """Greedy dedup of canonical points under permutation + wrap distance."""
    if not points:
        return []
    n = points[0].size
    perms = np.array(list(itertools.permutations(range(n))))
    kept: list[np.ndarray] = []
    kept_arr = np.empty((0, n))
    for cand in points:
        if kept_arr.shape[0]:
            variants = cand[perms]  # (P, n)
            d = np.abs(kept_arr[:, None, :] - variants[None, :, :]) % TWO_PI
            d = np.minimum(d, TWO_PI - d).max(axis=-1).min(axis=-1)
            if float(d.min()) < tol:
                continue
        kept.append(cand)
        kept_arr = np.vstack([kept_arr, cand[None, :]])
    return kept


def find_equilibria(
    pattern: IlluminationPattern,
    params: SystemParams,
    resolution: int = 100,
    tol_force: float = TOL_FORCE,
    tol_dedup: float = TOL_DEDUP,
    eps_eig: float = EPS_EIG,
    jacobian_step: float = 1e-6,
    max_newton: int = 80,
) -> list[Equilibrium]:
    """All distinct zero-force configurations, classified and sorted.

    Output ordering is deterministic (lexicographic in the canonical
    positions), so data-parallel polishing would merge identically.
    """
    n = params.n_particles
    if n > 4:
        raise ValueError("exhaustive equilibrium search supports N <= 4")
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    if pattern.is_empty:
        raise DegenerateLandscape("all pump strengths are zero; force vanishes identically")

    _, forces = _grid_forces(pattern, params, resolution)
    seeds = _seed_cells(forces, resolution, n)
    cell = TWO_PI / resolution

    converged = _newton_polish_batch(
        seeds, pattern, params, tol_force, jacobian_step, max_step=cell, max_iter=max_newton
    )
    polished = [canonical_positions(x) for x in converged]
    polished.sort(key=lambda p: tuple(p))
    accepted = _dedup_canonical(polished, tol_dedup)

    if not accepted:
        return []
    pts = np.array(accepted)
    jacs = _jacobian_batch(pts, pattern, params, jacobian_step)
    eig_re = np.sort(np.linalg.eigvals(jacs).real, axis=-1)[:, ::-1]
    _, intensities = adiabatic_field_batch(pts, pattern, params)
    return [
        Equilibrium(
            positions=pts[i],
            classification=classify_eigenvalues(eig_re[i], eps_eig),
            intensity=intensities[i],
            eigen_real_parts=eig_re[i],
        )
        for i in range(pts.shape[0])
    ]


def landscape(
    pattern: IlluminationPattern, params: SystemParams, resolution: int = 100
) -> LandscapeGrid:
    """Per-mode intensities, total intensity, and force on a regular grid."""
    n = params.n_particles
    if n not in (1, 2, 3):
        raise ValueError("landscape supports N in {1, 2, 3}")
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    axis = np.arange(resolution) * (TWO_PI / resolution)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    per_mode, p_tot = adiabatic_field_batch(points, pattern, params)
    forces = adiabatic_force(points, pattern, params)
    shape = (resolution,) * n
    grid = LandscapeGrid(
        axis=axis,
        mode_orders=pattern.mode_orders,
        mode_intensity=np.moveaxis(per_mode.reshape(shape + (-1,)), -1, 0),
        p_tot=p_tot.reshape(shape),
        force=np.moveaxis(forces.reshape(shape + (n,)), -1, 0),
    )
    if not (np.all(np.isfinite(grid.p_tot)) and np.all(np.isfinite(grid.force))):
        raise ValueError("landscape produced non-finite values")
    return grid
