"""Illumination patterns and their time sequencing.

A schedule owns a named list of patterns and a switching rule: static
(never switch), periodic_cycle (listed order, wrapping), or random_switch
(uniform draws with replacement from the schedule's own RNG). Switches are
instantaneous; triggers are either stationarity detection or a fixed
simulated-time interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from cavity_adapt.model import ConfigError, IlluminationPattern, init_seed_sequence


class ScheduleExhausted(RuntimeError):
    """A pattern was requested past the schedule's switch budget."""


@dataclass(frozen=True)
class Trigger:
    kind: str = "stationarity"
    interval: float | None = None
    tol_v: float = 1e-6
    tol_f: float = 1e-8
    window: int = 4
    check_stride: int = 10
    min_dwell: int = 20
    timeout: float = 1e4

    def __post_init__(self) -> None:
        if self.kind not in ("stationarity", "fixed_interval"):
            raise ConfigError(f"unknown trigger kind {self.kind!r}")
        if self.kind == "fixed_interval" and not (self.interval and self.interval > 0):
            raise ConfigError("fixed_interval trigger requires interval > 0")


@dataclass(frozen=True)
class Schedule:
    mode: str
    names: tuple[str, ...]
    patterns: tuple[IlluminationPattern, ...]
    trigger: Trigger
    max_switches: int
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("static", "periodic_cycle", "random_switch"):
            raise ConfigError(f"unknown schedule mode {self.mode!r}")
        if not self.patterns:
            raise ConfigError("schedule needs at least one pattern")
        if len(self.names) != len(self.patterns):
            raise ConfigError("pattern names and patterns must align")
        if self.max_switches < 1:
            raise ConfigError("max_switches must be >= 1")

    @staticmethod
    def from_config(
        block: Mapping[str, Any],
        patterns: Mapping[str, IlluminationPattern],
        master_seed: int,
    ) -> "Schedule":
        names = tuple(block["patterns"])
        trig = dict(block["trigger"])
        trigger = Trigger(**trig)
        seed = block.get("seed")
        if seed is None:
            # stream 1 of the master seed drives schedule draws
            seed = int(init_seed_sequence(master_seed, 1).generate_state(1, np.uint64)[0])
        return Schedule(
            mode=block["mode"],
            names=names,
            patterns=tuple(patterns[n] for n in names),
            trigger=trigger,
            max_switches=int(block["max_switches"]),
            seed=int(seed),
        )

    def start_index(self) -> int:
        """Index of the pattern active at t = 0 before any RNG draw.

        For random_switch the actual first pattern is drawn by the run loop
        via :func:`next_pattern`; the state's fields are re-keyed on every
        activation, so this only seeds the zero-field layout.
        """
        return 0

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def all_mode_orders(self) -> tuple[int, ...]:
        orders: set[int] = set()
        for p in self.patterns:
            orders.update(p.mode_orders)
        return tuple(sorted(orders))


def next_index(schedule: Schedule, switch_index: int, rng: np.random.Generator) -> int:
    """Pattern index for activation number ``switch_index`` (0-based)."""
    if switch_index >= schedule.max_switches:
        raise ScheduleExhausted(
            f"switch {switch_index} requested but max_switches = {schedule.max_switches}"
        )
    if schedule.mode == "static":
        return 0
    if schedule.mode == "periodic_cycle":
        return switch_index % len(schedule.patterns)
    return int(rng.integers(len(schedule.patterns)))


def next_pattern(
    schedule: Schedule, switch_index: int, rng: np.random.Generator
) -> IlluminationPattern:
    """The pattern activated at the given switch index.

    random_switch draws advance ``rng``; pass the schedule's own generator
    and call once per activation to reproduce a run's sequence.
    """
    return schedule.patterns[next_index(schedule, switch_index, rng)]


def make_binary_pattern(mask: Sequence[int], eta: float) -> IlluminationPattern:
    """Pattern pumping mode i+1 at strength eta wherever mask[i] is 1.

    An all-zero mask yields the empty canonical pattern.
    """
    if len(mask) == 0:
        raise ConfigError("mask must be non-empty")
    entries = []
    for i, bit in enumerate(mask):
        if bit not in (0, 1, False, True):
            raise ConfigError(f"mask entries must be 0 or 1, got {bit!r}")
        if bit:
            entries.append((i + 1, float(eta)))
    return IlluminationPattern(tuple(entries))


def make_comb_patterns(
    n1: int,
    dn: int,
    master_count: int,
    pattern_count: int,
    modes_per_pattern: int,
    eta: float,
    rng: np.random.Generator,
) -> tuple[IlluminationPattern, ...]:
    """Random equal-strength subsets of the arithmetic master comb.

    The master set is {n1, n1+dn, ..., n1+(master_count-1)*dn}; each pattern
    is a uniform subset (without replacement) of ``modes_per_pattern`` of
    those orders, all pumped at ``eta``. Reproducible for a given ``rng``.
    """
    if master_count < 1 or pattern_count < 1:
        raise ConfigError("master_count and pattern_count must be >= 1")
    if modes_per_pattern > master_count:
        raise ConfigError("modes_per_pattern cannot exceed master_count")
    master = np.array([n1 + j * dn for j in range(master_count)], dtype=int)
    patterns = []
    for _ in range(pattern_count):
        chosen = rng.choice(master, size=modes_per_pattern, replace=False)
        patterns.append(IlluminationPattern(tuple((int(m), float(eta)) for m in sorted(chosen))))
    return tuple(patterns)
