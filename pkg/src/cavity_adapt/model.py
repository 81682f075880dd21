"""Domain types, unit conventions, and configuration validation.

Unit convention: hbar = 1 and fundamental wavenumber k = 1, hence mode n has
wavenumber k_n = n, the fundamental wavelength is 2*pi, and the mass follows
from the recoil frequency omega_R = k^2/(2 m) as m = 1/(2 omega_R). A config
document declares whether its rate and time values are quoted in units of
kappa or of omega_R; the declared unit's own rate is then 1 by definition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

CLASS_STABLE = "stable"
CLASS_UNSTABLE = "unstable"
CLASS_MARGINAL = "marginal"
CLASSIFICATIONS = (CLASS_STABLE, CLASS_UNSTABLE, CLASS_MARGINAL)


class ConfigError(ValueError):
    """A configuration document or parameter set failed validation."""


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class SystemParams:
    """Global physical constants of one particle-cavity system.

    kappa >= 0 is accepted here so that the conservative (kappa = 0,
    friction = 0) integrator checks can be expressed; configuration
    documents reject kappa <= 0 (see :func:`build_system`).
    """

    n_particles: int
    recoil_frequency: float
    kappa: float
    u0: float
    delta_c: float
    friction: float = 0.0

    def __post_init__(self) -> None:
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise ConfigError(f"n_particles must be a positive integer, got {self.n_particles}")
        object.__setattr__(self, "n_particles", int(self.n_particles))
        for name in ("recoil_frequency", "kappa", "u0", "delta_c", "friction"):
            object.__setattr__(self, name, _check_finite(name, getattr(self, name)))
        if self.recoil_frequency <= 0:
            raise ConfigError(f"recoil_frequency must be > 0, got {self.recoil_frequency}")
        if self.kappa < 0:
            raise ConfigError(f"kappa must be >= 0, got {self.kappa}")
        if self.friction < 0:
            raise ConfigError(f"friction must be >= 0, got {self.friction}")

    @property
    def mass(self) -> float:
        """Particle mass; m = 1/(2 omega_R) since hbar = k = 1."""
        return 0.5 / self.recoil_frequency


@dataclass(frozen=True)
class IlluminationPattern:
    """The pumped mode-index set with per-mode pump strengths.

    Canonical form: entries sorted by ascending mode order, zero-strength
    entries removed. Mode n has wavenumber k_n = n.
    """

    entries: tuple[tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        canon = []
        seen = set()
        for order, eta in self.entries:
            if int(order) != order or order < 1:
                raise ConfigError(f"mode_order must be a positive integer, got {order!r}")
            order = int(order)
            eta = _check_finite(f"eta for mode {order}", eta)
            if eta < 0:
                raise ConfigError(f"pump strength for mode {order} must be >= 0, got {eta}")
            if order in seen:
                raise ConfigError(f"duplicate mode order {order} in pattern")
            seen.add(order)
            if eta > 0:
                canon.append((order, eta))
        canon.sort()
        object.__setattr__(self, "entries", tuple(canon))

    @property
    def is_empty(self) -> bool:
        return not self.entries

    @property
    def mode_orders(self) -> tuple[int, ...]:
        return tuple(order for order, _ in self.entries)

    @property
    def max_order(self) -> int:
        return max(self.mode_orders) if self.entries else 1

    def wavenumbers(self) -> np.ndarray:
        return np.array([order for order, _ in self.entries], dtype=float)

    def strengths(self) -> np.ndarray:
        return np.array([eta for _, eta in self.entries], dtype=float)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=a.dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SystemState:
    """Positions, momenta and complex mode amplitudes at one instant.

    Positions are stored unwrapped; reduction modulo the fundamental
    wavelength is a diagnostics concern. ``fields`` carries exactly the
    pumped mode orders of the active pattern.
    """

    positions: np.ndarray
    momenta: np.ndarray
    fields: tuple[tuple[int, complex], ...]
    time: float = 0.0

    def __post_init__(self) -> None:
        x = np.asarray(self.positions, dtype=float)
        p = np.asarray(self.momenta, dtype=float)
        if x.ndim != 1 or p.shape != x.shape:
            raise ConfigError("positions and momenta must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
            raise ConfigError("positions and momenta must be finite")
        object.__setattr__(self, "positions", _readonly(x))
        object.__setattr__(self, "momenta", _readonly(p))
        entries = tuple(sorted((int(n), complex(a)) for n, a in dict(self.fields).items()))
        object.__setattr__(self, "fields", entries)
        object.__setattr__(self, "time", float(self.time))

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    def field_map(self) -> dict[int, complex]:
        return dict(self.fields)

    def field_vector(self, pattern: IlluminationPattern) -> np.ndarray:
        """Amplitudes aligned with the pattern's canonical mode order."""
        fmap = self.field_map()
        missing = [n for n in pattern.mode_orders if n not in fmap]
        if missing:
            raise ConfigError(f"state fields missing pumped modes {missing}")
        return np.array([fmap[n] for n in pattern.mode_orders], dtype=complex)

    @staticmethod
    def zero_fields(
        positions: Sequence[float],
        pattern: IlluminationPattern,
        momenta: Sequence[float] | None = None,
        time: float = 0.0,
    ) -> "SystemState":
        x = np.asarray(positions, dtype=float)
        p = np.zeros_like(x) if momenta is None else np.asarray(momenta, dtype=float)
        fields = tuple((n, 0.0 + 0.0j) for n in pattern.mode_orders)
        return SystemState(positions=x, momenta=p, fields=fields, time=time)


@dataclass(frozen=True)
class Equilibrium:
    """A zero-force configuration with its stability classification."""

    positions: np.ndarray
    classification: str
    intensity: float
    eigen_real_parts: np.ndarray

    def __post_init__(self) -> None:
        if self.classification not in CLASSIFICATIONS:
            raise ConfigError(f"unknown classification {self.classification!r}")
        object.__setattr__(self, "positions", _readonly(np.asarray(self.positions, dtype=float)))
        object.__setattr__(
            self, "eigen_real_parts", _readonly(np.asarray(self.eigen_real_parts, dtype=float))
        )
        object.__setattr__(self, "intensity", float(self.intensity))


@dataclass(frozen=True)
class Trajectory:
    """Sampled time series of one run plus its schedule events.

    Channels: per-mode intensities |alpha_n|^2 over the union of all mode
    orders that the schedule can pump, total intensity P_tot, total order
    parameter Theta_tot, and the cluster count N0 (with the companion
    pair-count reading N0_pairs).
    """

    times: np.ndarray
    positions: np.ndarray
    momenta: np.ndarray
    mode_orders: tuple[int, ...]
    mode_intensity: np.ndarray
    p_tot: np.ndarray
    theta_tot: np.ndarray
    n0: np.ndarray
    n0_pairs: np.ndarray
    events: tuple[tuple[float, str], ...]
    seed: int

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ConfigError("trajectory must contain at least one sample")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("sample times must be strictly increasing")
        for ev_t, _ in self.events:
            if not (t[0] <= ev_t <= t[-1]):
                raise ConfigError(f"event time {ev_t} outside sampled range")
        object.__setattr__(self, "times", _readonly(t))
        for name in ("positions", "momenta", "mode_intensity", "p_tot", "theta_tot"):
            object.__setattr__(self, name, _readonly(np.asarray(getattr(self, name), dtype=float)))
        object.__setattr__(self, "n0", _readonly(np.asarray(self.n0, dtype=int)))
        object.__setattr__(self, "n0_pairs", _readonly(np.asarray(self.n0_pairs, dtype=int)))
        object.__setattr__(self, "events", tuple((float(a), str(b)) for a, b in self.events))

    @property
    def n_samples(self) -> int:
        return self.times.shape[0]

    def final_positions(self) -> np.ndarray:
        return np.array(self.positions[-1])


# --------------------------------------------------------------------------
# Configuration documents
# --------------------------------------------------------------------------

_UNITS = ("kappa", "omega_r")

_TOP_KEYS = {"unit", "system", "patterns", "schedule", "integrator", "noise", "seed", "initial"}
_SYSTEM_KEYS = {"n_particles", "recoil_frequency", "kappa", "u0", "delta_c", "friction"}
_SCHEDULE_KEYS = {"mode", "patterns", "trigger", "max_switches", "seed"}
_TRIGGER_KEYS = {"kind", "interval", "tol_v", "tol_f", "window", "check_stride", "min_dwell", "timeout"}
_INTEGRATOR_KEYS = {"scheme", "dt", "max_time", "sample_stride"}
_NOISE_KEYS = {"enabled", "kick_interval", "kick_sigma", "seed"}
_INITIAL_KEYS = {"positions", "momenta", "fields"}
_ENTRY_KEYS = {"mode_order", "eta"}


def _reject_unknown(block: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}")


def _require(block: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in block:
        raise ConfigError(f"missing required key {key!r} in {where}")
    return block[key]


def validate_config(config: Mapping[str, Any]) -> dict[str, Any]:
    """Validate a config document, fail-closed, and fill defaults.

    Returns a plain dict snapshot with every default made explicit, suitable
    for writing into a run manifest and for reloading bit-for-bit.
    """
    if not isinstance(config, Mapping):
        raise ConfigError("config document must be a JSON object")
    _reject_unknown(config, _TOP_KEYS, "config")

    unit = _require(config, "unit", "config")
    if unit not in _UNITS:
        raise ConfigError(f"unit must be one of {_UNITS}, got {unit!r}")

    system = dict(_require(config, "system", "config"))
    _reject_unknown(system, _SYSTEM_KEYS, "system")
    n = _require(system, "n_particles", "system")
    if int(n) != n or n < 1:
        raise ConfigError(f"n_particles must be a positive integer, got {n!r}")
    # The declared unit's own rate is 1 by definition; stating another value
    # would silently mix unit systems.
    if unit == "kappa":
        kappa = float(system.setdefault("kappa", 1.0))
        if kappa != 1.0:
            raise ConfigError("unit is 'kappa' but system.kappa != 1")
        system.setdefault("recoil_frequency", 1.0)
    else:
        omega_r = float(system.setdefault("recoil_frequency", 1.0))
        if omega_r != 1.0:
            raise ConfigError("unit is 'omega_r' but system.recoil_frequency != 1")
        if "kappa" not in system:
            raise ConfigError("system.kappa is required when unit is 'omega_r'")
    if float(system["kappa"]) <= 0:
        raise ConfigError(f"kappa must be > 0 in a config, got {system['kappa']}")
    system.setdefault("friction", 0.0)
    for key in ("recoil_frequency", "kappa", "u0", "delta_c", "friction"):
        system[key] = _check_finite(f"system.{key}", _require(system, key, "system"))
    system["n_particles"] = int(n)

    patterns_block = _require(config, "patterns", "config")
    if not isinstance(patterns_block, Mapping) or not patterns_block:
        raise ConfigError("patterns must be a non-empty mapping of name -> entry list")
    patterns: dict[str, list[dict[str, float]]] = {}
    for name, entries in patterns_block.items():
        if not isinstance(entries, Sequence) or isinstance(entries, (str, bytes)):
            raise ConfigError(f"pattern {name!r} must be a list of entries")
        out = []
        for entry in entries:
            _reject_unknown(entry, _ENTRY_KEYS, f"pattern {name!r}")
            out.append(
                {
                    "mode_order": int(_require(entry, "mode_order", f"pattern {name!r}")),
                    "eta": float(_require(entry, "eta", f"pattern {name!r}")),
                }
            )
        # constructing the pattern enforces distinctness / non-negativity
        IlluminationPattern(tuple((e["mode_order"], e["eta"]) for e in out))
        patterns[str(name)] = out

    schedule = dict(_require(config, "schedule", "config"))
    _reject_unknown(schedule, _SCHEDULE_KEYS, "schedule")
    mode = schedule.setdefault("mode", "static")
    if mode not in ("static", "periodic_cycle", "random_switch"):
        raise ConfigError(f"schedule.mode must be static|periodic_cycle|random_switch, got {mode!r}")
    names = schedule.setdefault("patterns", sorted(patterns))
    if not names:
        raise ConfigError("schedule.patterns must list at least one pattern name")
    for name in names:
        if name not in patterns:
            raise ConfigError(f"schedule references unknown pattern {name!r}")
    schedule.setdefault("max_switches", 1 if mode == "static" else len(names))
    if int(schedule["max_switches"]) < 1:
        raise ConfigError("schedule.max_switches must be >= 1")
    schedule["max_switches"] = int(schedule["max_switches"])
    trigger = dict(schedule.get("trigger") or {"kind": "stationarity"})
    _reject_unknown(trigger, _TRIGGER_KEYS, "schedule.trigger")
    kind = trigger.setdefault("kind", "stationarity")
    if kind not in ("stationarity", "fixed_interval"):
        raise ConfigError(f"trigger.kind must be stationarity|fixed_interval, got {kind!r}")
    if kind == "fixed_interval":
        interval = _check_finite("trigger.interval", _require(trigger, "interval", "trigger"))
        if interval <= 0:
            raise ConfigError("trigger.interval must be > 0")
        trigger["interval"] = interval
    else:
        trigger.setdefault("tol_v", 1e-6)
        trigger.setdefault("tol_f", 1e-8)
        trigger.setdefault("window", 4)
        trigger.setdefault("check_stride", 10)
        trigger.setdefault("min_dwell", 20)
        trigger.setdefault("timeout", 1e4)
        if trigger["window"] < 2:
            raise ConfigError("trigger.window must be >= 2")
    schedule["trigger"] = trigger
    if "seed" in schedule and schedule["seed"] is not None:
        schedule["seed"] = int(schedule["seed"])
    else:
        schedule["seed"] = None

    integrator = dict(config.get("integrator") or {})
    _reject_unknown(integrator, _INTEGRATOR_KEYS, "integrator")
    scheme = integrator.setdefault("scheme", "overdamped")
    if scheme not in ("full", "overdamped"):
        raise ConfigError(f"integrator.scheme must be full|overdamped, got {scheme!r}")
    kappa_v = float(system["kappa"])
    omega_r_v = float(system["recoil_frequency"])
    integrator.setdefault("dt", min(0.02 / kappa_v, 0.02 / omega_r_v))
    integrator.setdefault("max_time", 100.0)
    integrator.setdefault("sample_stride", 10)
    if not float(integrator["dt"]) > 0:
        raise ConfigError("integrator.dt must be > 0")
    if not float(integrator["max_time"]) > 0:
        raise ConfigError("integrator.max_time must be > 0")
    if int(integrator["sample_stride"]) < 1:
        raise ConfigError("integrator.sample_stride must be >= 1")
    integrator["dt"] = float(integrator["dt"])
    integrator["max_time"] = float(integrator["max_time"])
    integrator["sample_stride"] = int(integrator["sample_stride"])
    if scheme == "overdamped" and float(system["friction"]) <= 0:
        raise ConfigError("overdamped scheme requires system.friction > 0")

    noise = dict(config.get("noise") or {})
    _reject_unknown(noise, _NOISE_KEYS, "noise")
    noise.setdefault("enabled", False)
    noise.setdefault("kick_interval", 1.0)
    noise.setdefault("kick_sigma", 0.0)
    noise.setdefault("seed", None)
    if noise["enabled"]:
        if not float(noise["kick_interval"]) > 0:
            raise ConfigError("noise.kick_interval must be > 0")
        if float(noise["kick_sigma"]) < 0:
            raise ConfigError("noise.kick_sigma must be >= 0")
    noise["kick_interval"] = float(noise["kick_interval"])
    noise["kick_sigma"] = float(noise["kick_sigma"])
    if noise["seed"] is not None:
        noise["seed"] = int(noise["seed"])

    seed = _require(config, "seed", "config")
    if int(seed) != seed or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")

    initial = dict(config.get("initial") or {})
    _reject_unknown(initial, _INITIAL_KEYS, "initial")
    for key in ("positions", "momenta"):
        if key in initial:
            vals = [float(v) for v in initial[key]]
            if len(vals) != int(n):
                raise ConfigError(f"initial.{key} must list exactly {n} values")
            initial[key] = vals
    if "fields" in initial:
        initial["fields"] = {int(k): [float(v[0]), float(v[1])] for k, v in initial["fields"].items()}

    return {
        "unit": unit,
        "system": system,
        "patterns": patterns,
        "schedule": schedule,
        "integrator": integrator,
        "noise": noise,
        "seed": int(seed),
        "initial": initial,
    }


def pattern_from_config(entries: Iterable[Mapping[str, float]]) -> IlluminationPattern:
    return IlluminationPattern(tuple((int(e["mode_order"]), float(e["eta"])) for e in entries))


def init_seed_sequence(seed: int, stream: int) -> np.random.SeedSequence:
    """Deterministic child seed stream; stream 0 = initial positions,
    1 = schedule draws, 2 = noise kicks."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))


def build_system(config: Mapping[str, Any]):
    """Validate a config document and build (params, initial state, schedule).

    Initial positions default to a uniform draw on [0, 2*pi) from the seeded
    RNG; momenta and fields default to zero. The active pattern at t = 0 is
    the schedule's first, so the initial state's fields carry its modes.
    """
    from cavity_adapt.illumination import Schedule  # deferred; illumination imports model

    cfg = validate_config(config)
    sysd = cfg["system"]
    params = SystemParams(
        n_particles=sysd["n_particles"],
        recoil_frequency=sysd["recoil_frequency"],
        kappa=sysd["kappa"],
        u0=sysd["u0"],
        delta_c=sysd["delta_c"],
        friction=sysd["friction"],
    )

    patterns = {name: pattern_from_config(entries) for name, entries in cfg["patterns"].items()}
    sched_cfg = cfg["schedule"]
    schedule = Schedule.from_config(sched_cfg, patterns, master_seed=cfg["seed"])

    n = params.n_particles
    initial = cfg["initial"]
    if "positions" in initial:
        x0 = np.asarray(initial["positions"], dtype=float)
    else:
        rng = np.random.default_rng(init_seed_sequence(cfg["seed"], 0))
        x0 = rng.uniform(0.0, TWO_PI, size=n)
    p0 = np.asarray(initial.get("momenta", np.zeros(n)), dtype=float)
    first = schedule.patterns[schedule.start_index()]
    fmap = {int(k): complex(v[0], v[1]) for k, v in initial.get("fields", {}).items()}
    fields = tuple((m, fmap.get(m, 0.0 + 0.0j)) for m in first.mode_orders)
    state = SystemState(positions=x0, momenta=p0, fields=fields, time=0.0)
    return params, state, schedule
