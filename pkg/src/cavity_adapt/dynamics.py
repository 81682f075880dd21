"""Time evolution of the coupled particle-field system.

Two schemes:

* ``full`` integrates positions, momenta and mode amplitudes together with a
  palindromic splitting: half kick (force plus exact exponential friction),
  half drift, exact field flow at frozen positions over the whole step, half
  drift, half kick. The field substep integrates the linear factor
  exp((i delta_c - kappa) dt) exactly, so kappa-stiff (bad cavity) regimes
  impose no step-size bound; the remaining splitting error is second order.

* ``overdamped`` moves positions only, x <- x + F(x)/mu * dt, with fields
  eliminated adiabatically. Momenta are unused.

Momentum noise is modeled as independent Gaussian kicks applied to every
particle at fixed simulated-time intervals.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from cavity_adapt.diagnostics import (
    cluster_count,
    coincident_pair_count,
    default_cluster_epsilon,
    total_order,
)
from cavity_adapt.illumination import Schedule, next_index
from cavity_adapt.model import (
    ConfigError,
    IlluminationPattern,
    SystemParams,
    SystemState,
    Trajectory,
    init_seed_sequence,
)
from cavity_adapt.optics import adiabatic_field, adiabatic_force, field_impulse_exact

__all__ = [
    "IntegratorOptions",
    "NoiseOptions",
    "NonFinite",
    "ScheduleStall",
    "apply_kicks",
    "default_dt",
    "detect_stationary",
    "relax_overdamped",
    "run_trajectory",
    "step_full",
    "step_overdamped",
]


class NonFinite(RuntimeError):
    """A state component left the finite range during integration."""


class ScheduleStall(RuntimeError):
    """Stationarity-gated switching never triggered within the timeout."""


def default_dt(params: SystemParams) -> float:
    """min(0.02/kappa, 0.02/omega_R); the exponential field update keeps the
    full scheme robust even when kappa >> omega_R."""
    bounds = [0.02 / params.recoil_frequency]
    if params.kappa > 0:
        bounds.append(0.02 / params.kappa)
    return min(bounds)


@dataclass(frozen=True)
class IntegratorOptions:
    scheme: str
    dt: float
    max_time: float
    sample_stride: int = 10

    def __post_init__(self) -> None:
        if self.scheme not in ("full", "overdamped"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        if not self.max_time > 0:
            raise ConfigError("max_time must be > 0")
        if self.sample_stride < 1:
            raise ConfigError("sample_stride must be >= 1")

    @staticmethod
    def from_config(block: Mapping[str, Any]) -> "IntegratorOptions":
        return IntegratorOptions(
            scheme=block["scheme"],
            dt=float(block["dt"]),
            max_time=float(block["max_time"]),
            sample_stride=int(block["sample_stride"]),
        )


@dataclass(frozen=True)
class NoiseOptions:
    enabled: bool = False
    kick_interval: float = 1.0
    kick_sigma: float = 0.0
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.kick_interval > 0:
            raise ConfigError("kick_interval must be > 0")
        if self.kick_sigma < 0:
            raise ConfigError("kick_sigma must be >= 0")

    @staticmethod
    def from_config(block: Mapping[str, Any]) -> "NoiseOptions":
        return NoiseOptions(
            enabled=bool(block["enabled"]),
            kick_interval=float(block["kick_interval"]),
            kick_sigma=float(block["kick_sigma"]),
            seed=block.get("seed"),
        )


def _check_finite_arrays(*arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFinite("state left the finite range")


def step_full(
    state: SystemState, pattern: IlluminationPattern, params: SystemParams, dt: float
) -> SystemState:
    """One step of the split full scheme (positions, momenta, fields).

    Palindromic composition: exact friction over dt/2, drift dt/2, exact
    coupled momentum-field flow over dt at frozen positions, drift dt/2,
    exact friction dt/2. The field's linear factor exp((i delta_c - kappa) dt)
    is inside the exact flow, so kappa-stiffness does not restrict dt; the
    splitting is second order in dt and symplectic when kappa = mu = 0.
    """
    if not dt > 0:
        raise ConfigError("dt must be > 0")
    x = np.array(state.positions)
    p = np.array(state.momenta)
    alpha = state.field_vector(pattern)
    x, p, alpha = _step_full_arrays(x, p, alpha, pattern, params, dt)
    fields = tuple(zip(pattern.mode_orders, (complex(a) for a in alpha)))
    return SystemState(positions=x, momenta=p, fields=fields, time=state.time + dt)


def _step_full_arrays(
    x: np.ndarray,
    p: np.ndarray,
    alpha: np.ndarray,
    pattern: IlluminationPattern,
    params: SystemParams,
    dt: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    decay = math.exp(-params.friction * 0.5 * dt) if params.friction else 1.0
    drift = 0.5 * dt / params.mass
    p = p * decay
    x = x + drift * p
    dp, alpha = field_impulse_exact(x, alpha, pattern, params, dt)
    p = p + dp
    x = x + drift * p
    p = p * decay
    _check_finite_arrays(x, p, alpha)
    return x, p, alpha


def step_overdamped(
    positions: np.ndarray,
    pattern: IlluminationPattern,
    params: SystemParams,
    dt: float,
) -> np.ndarray:
    """Explicit Euler position update x <- x + F(x)/mu * dt."""
    if params.friction <= 0:
        raise ConfigError("overdamped stepping requires friction > 0")
    x = np.asarray(positions, dtype=float)
    out = x + (dt / params.friction) * adiabatic_force(x, pattern, params)
    _check_finite_arrays(out)
    return out


def apply_kicks(state: SystemState, noise: NoiseOptions, rng: np.random.Generator) -> SystemState:
    """Add one independent Gaussian momentum increment per particle."""
    if not noise.enabled:
        raise ConfigError("apply_kicks requires noise.enabled")
    p = state.momenta + rng.normal(0.0, noise.kick_sigma, size=state.n_particles)
    return SystemState(positions=state.positions, momenta=p, fields=state.fields, time=state.time)


def _window_stationary(
    window: Sequence[tuple[float, np.ndarray, np.ndarray]],
    pattern: IlluminationPattern,
    params: SystemParams,
    tol_v: float,
    tol_f: float,
) -> bool:
    if len(window) < 2:
        return False
    speed = float(np.abs(window[-1][2]).max()) / params.mass
    for (t0, x0, _), (t1, x1, _) in zip(window, list(window)[1:]):
        speed = max(speed, float(np.abs(x1 - x0).max()) / (t1 - t0))
    if speed >= tol_v:
        return False
    for _, x, _ in window:
        f = adiabatic_force(x, pattern, params)
        if f.size and float(np.abs(f).max()) >= tol_f:
            return False
    return True


def detect_stationary(
    window: Sequence[SystemState],
    pattern: IlluminationPattern,
    params: SystemParams,
    tol_v: float,
    tol_f: float,
) -> bool:
    """True iff the max particle speed and adiabatic force stay below
    tolerance over the window. Speed combines momentum (p/m) and the
    displacement between consecutive window entries."""
    if len(window) < 2:
        raise ValueError("stationarity window needs at least 2 samples")
    triples = [(s.time, np.array(s.positions), np.array(s.momenta)) for s in window]
    return _window_stationary(triples, pattern, params, tol_v, tol_f)


@dataclass
class _Recorder:
    union_orders: tuple[int, ...]
    eps_cluster: float
    times: list[float]
    positions: list[np.ndarray]
    momenta: list[np.ndarray]
    mode_intensity: list[np.ndarray]
    p_tot: list[float]
    theta_tot: list[float]
    n0: list[int]
    n0_pairs: list[int]

    def sample(
        self,
        t: float,
        x: np.ndarray,
        p: np.ndarray,
        alpha: np.ndarray,
        union_idx: np.ndarray,
        pattern: IlluminationPattern,
    ) -> None:
        if self.times and t <= self.times[-1]:
            return
        per_mode = alpha.real**2 + alpha.imag**2
        row = np.zeros(len(self.union_orders))
        row[union_idx] = per_mode
        self.times.append(t)
        self.positions.append(x.copy())
        self.momenta.append(p.copy())
        self.mode_intensity.append(row)
        self.p_tot.append(float(per_mode.sum()))
        self.theta_tot.append(total_order(x, pattern))
        self.n0.append(cluster_count(x, self.eps_cluster))
        self.n0_pairs.append(coincident_pair_count(x, self.eps_cluster))


def run_trajectory(
    initial: SystemState,
    schedule: Schedule,
    params: SystemParams,
    integrator: IntegratorOptions,
    noise: NoiseOptions | None = None,
    seed: int | None = None,
) -> Trajectory:
    """Integrate one run: stepping, periodic kicks, schedule switching, and
    diagnostic sampling interleaved deterministically.

    Terminates at ``max_time`` or when the schedule's switch budget is spent.
    Raises :class:`ScheduleStall` if a stationarity trigger exceeds its
    timeout and :class:`NonFinite` on numerical blow-up.
    """
    noise = noise or NoiseOptions()
    record_seed = seed if seed is not None else (schedule.seed or 0)
    sched_rng = np.random.default_rng(schedule.seed)
    if noise.seed is not None:
        noise_rng = np.random.default_rng(noise.seed)
    else:
        noise_rng = np.random.default_rng(init_seed_sequence(record_seed, 2))

    overdamped = integrator.scheme == "overdamped"
    if overdamped and params.friction <= 0:
        raise ConfigError("overdamped runs require friction > 0")
    dt = integrator.dt
    trig = schedule.trigger

    union_orders = schedule.all_mode_orders()
    union_pos = {n: i for i, n in enumerate(union_orders)}
    eps_cluster = default_cluster_epsilon(max(union_orders) if union_orders else 1)
    rec = _Recorder(union_orders, eps_cluster, [], [], [], [], [], [], [], [])

    x = np.array(initial.positions)
    p = np.array(initial.momenta)
    t = float(initial.time)
    initial_fields = initial.field_map()

    switch_index = 0
    idx = next_index(schedule, switch_index, sched_rng)
    pattern = schedule.patterns[idx]
    union_idx = np.array([union_pos[n] for n in pattern.mode_orders], dtype=int)
    alpha = np.array([initial_fields.get(n, 0.0 + 0.0j) for n in pattern.mode_orders])
    events: list[tuple[float, str]] = [(t, schedule.names[idx])]

    def adiabatic_alpha() -> np.ndarray:
        return adiabatic_field(x, pattern, params).vector(pattern)

    if overdamped:
        alpha = adiabatic_alpha()
    rec.sample(t, x, p, alpha, union_idx, pattern)

    window: deque[tuple[float, np.ndarray, np.ndarray]] = deque(
        maxlen=trig.window if trig.kind == "stationarity" else 2
    )
    kick_count = 0
    steps_since_switch = 0
    t_last_switch = t
    steps = 0
    finished = False

    while not finished and t < integrator.max_time - 1e-12 * integrator.max_time:
        if overdamped:
            f = adiabatic_force(x, pattern, params)
            x = x + (dt / params.friction) * f
            _check_finite_arrays(x)
        else:
            x, p, alpha = _step_full_arrays(x, p, alpha, pattern, params, dt)
        t += dt
        steps += 1
        steps_since_switch += 1

        if noise.enabled:
            while t >= (kick_count + 1) * noise.kick_interval - 1e-9 * noise.kick_interval:
                p = p + noise_rng.normal(0.0, noise.kick_sigma, size=x.size)
                kick_count += 1

        fire = False
        if trig.kind == "fixed_interval":
            fire = (t - t_last_switch) >= trig.interval - 1e-12 * trig.interval
        elif steps_since_switch >= trig.min_dwell and steps % trig.check_stride == 0:
            window.append((t, x.copy(), p.copy()))
            if len(window) == window.maxlen:
                fire = _window_stationary(window, pattern, params, trig.tol_v, trig.tol_f)
        if trig.kind == "stationarity" and (t - t_last_switch) > trig.timeout:
            raise ScheduleStall(
                f"no stationarity within timeout {trig.timeout} after activation {switch_index}"
            )

        if steps % integrator.sample_stride == 0 or fire:
            if overdamped:
                alpha = adiabatic_alpha()
            rec.sample(t, x, p, alpha, union_idx, pattern)

        if fire:
            switch_index += 1
            if switch_index >= schedule.max_switches:
                finished = True
                break
            idx = next_index(schedule, switch_index, sched_rng)
            new_pattern = schedule.patterns[idx]
            carry = dict(zip(pattern.mode_orders, alpha))
            alpha = np.array([carry.get(n, 0.0 + 0.0j) for n in new_pattern.mode_orders])
            pattern = new_pattern
            union_idx = np.array([union_pos[n] for n in pattern.mode_orders], dtype=int)
            events.append((t, schedule.names[idx]))
            window.clear()
            steps_since_switch = 0
            t_last_switch = t
            if overdamped:
                alpha = adiabatic_alpha()

    if overdamped:
        alpha = adiabatic_alpha()
    rec.sample(t, x, p, alpha, union_idx, pattern)

    return Trajectory(
        times=np.array(rec.times),
        positions=np.array(rec.positions),
        momenta=np.array(rec.momenta),
        mode_orders=union_orders,
        mode_intensity=np.array(rec.mode_intensity),
        p_tot=np.array(rec.p_tot),
        theta_tot=np.array(rec.theta_tot),
        n0=np.array(rec.n0),
        n0_pairs=np.array(rec.n0_pairs),
        events=tuple(events),
        seed=record_seed,
    )


def relax_overdamped(
    positions: np.ndarray,
    pattern: IlluminationPattern,
    params: SystemParams,
    dt: float,
    tol_v: float = 1e-8,
    tol_f: float = 1e-8,
    max_steps: int = 2_000_000,
    check_stride: int = 10,
) -> np.ndarray:
    """Follow the overdamped flow until stationary; returns the rest point."""
    x = np.asarray(positions, dtype=float).copy()
    prev = x.copy()
    for step in range(1, max_steps + 1):
        x = x + (dt / params.friction) * adiabatic_force(x, pattern, params)
        if step % check_stride == 0:
            _check_finite_arrays(x)
            speed = float(np.abs(x - prev).max()) / (dt * check_stride)
            f_max = float(np.abs(adiabatic_force(x, pattern, params)).max())
            if speed < tol_v and f_max < tol_f:
                return x
            prev = x.copy()
    raise ScheduleStall(f"no stationarity within {max_steps} overdamped steps")
