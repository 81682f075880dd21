"""Observables: order parameters, scattered intensity, cluster count.

CSV column naming contract: ``P_tot``, ``Theta_tot``, ``Theta_n{order}``,
``N0`` (cluster particle count) plus the alternative pair-count reading
``N0_pairs``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from cavity_adapt.model import TWO_PI, IlluminationPattern
from cavity_adapt.optics import FieldSolution


@dataclass(frozen=True)
class DiagnosticsSample:
    time: float
    p_tot: float
    theta_tot: float
    theta_by_mode: tuple[tuple[int, float], ...]
    n0: int

    def __post_init__(self) -> None:
        for n, th in self.theta_by_mode:
            if abs(th) > 1.0 + 1e-12:
                raise ValueError(f"|Theta_{n}| = {abs(th)} exceeds 1")
        if not 0 <= self.n0:
            raise ValueError("N0 must be non-negative")


def order_parameter(positions: np.ndarray, mode_order: int) -> float:
    """Theta_n = (1/N) sum_j sin(k_n x_j), in [-1, 1]."""
    if mode_order < 1:
        raise ValueError("mode_order must be >= 1")
    x = np.mod(np.asarray(positions, dtype=float), TWO_PI)
    return float(np.sin(mode_order * x).mean())


def total_order(positions: np.ndarray, pattern: IlluminationPattern) -> float:
    """Theta_tot = sum over pumped modes of |Theta_n|."""
    return float(sum(abs(order_parameter(positions, n)) for n in pattern.mode_orders))


def cluster_count(positions: np.ndarray, epsilon: float) -> int:
    """Number of particles sitting in an epsilon-proximity cluster of size >= 2.

    Clusters are connected components of the graph linking pairs with
    |x_i - x_j| < epsilon (physical, unwrapped distance); on a line this is
    equivalent to chaining sorted neighbours closer than epsilon.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    x = np.sort(np.asarray(positions, dtype=float))
    if x.size < 2:
        return 0
    linked = np.diff(x) < epsilon
    count = 0
    run = 1
    for gap_linked in linked:
        if gap_linked:
            run += 1
        else:
            if run >= 2:
                count += run
            run = 1
    if run >= 2:
        count += run
    return count


def coincident_pair_count(positions: np.ndarray, epsilon: float) -> int:
    """Number of unordered pairs with |x_i - x_j| < epsilon (alternative N0)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    x = np.sort(np.asarray(positions, dtype=float))
    count = 0
    j = 0
    for i in range(x.size):
        if j < i + 1:
            j = i + 1
        while j < x.size and x[j] - x[i] < epsilon:
            j += 1
        count += j - i - 1
    return count


def default_cluster_epsilon(max_mode_order: int) -> float:
    """Coincidence tolerance: 1e-2 of the shortest pumped wavelength."""
    return 1e-2 * TWO_PI / max(1, int(max_mode_order))


def total_intensity(fields: Mapping[int, complex] | FieldSolution | np.ndarray) -> float:
    """P_tot = sum_n |a_n|^2."""
    if isinstance(fields, FieldSolution):
        values = np.array([a for _, a in fields.amplitudes], dtype=complex)
    elif isinstance(fields, Mapping):
        values = np.array(list(fields.values()), dtype=complex)
    else:
        values = np.asarray(fields, dtype=complex)
    if values.size == 0:
        return 0.0
    return float((values.real**2 + values.imag**2).sum())
