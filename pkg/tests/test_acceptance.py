"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. Every tolerance is pinned
here; the oracles live in tests/oracles.py and never call the solver paths
they judge.
"""

import json
import math
import time

import numpy as np
import pytest

from cavity_adapt.cli import main
from cavity_adapt.dynamics import (
    IntegratorOptions,
    NoiseOptions,
    run_trajectory,
    step_overdamped,
)
from cavity_adapt.equilibria import find_equilibria
from cavity_adapt.model import (
    IlluminationPattern,
    SystemParams,
    SystemState,
    build_system,
    validate_config,
)
from cavity_adapt.optics import (
    adiabatic_field,
    adiabatic_field_batch,
    energy,
    field_step_exact,
)
from cavity_adapt.presets import load_preset

from oracles import flow_stable_mask, grid_flow_stable_points, perm_dist

TWO_PI = 2.0 * math.pi


def report(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {num:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")


@pytest.fixture(scope="module")
def fig2_params():
    return SystemParams(2, 1.0, 1.0, -0.05, -1.1, friction=1.0)


@pytest.fixture(scope="module")
def fig2a_pattern():
    return IlluminationPattern(((5, 0.625),))


@pytest.fixture(scope="module")
def fig2b_pattern():
    return IlluminationPattern(tuple((n, 0.625) for n in (1, 3, 4, 5)))


@pytest.fixture(scope="module")
def fig2a_equilibria(fig2_params, fig2a_pattern):
    return find_equilibria(fig2a_pattern, fig2_params, resolution=100)


def test_01_adiabatic_consistency(fig2_params, fig2b_pattern):
    """Integrating the mode equation at frozen positions converges to the
    adiabatic formula within 1e-6 relative per mode by t = 20/kappa."""
    t0 = time.time()
    rng = np.random.default_rng(11)
    t_end, n_steps = 20.0 / fig2_params.kappa, 400
    dt = t_end / n_steps
    worst = 0.0
    for _ in range(10):
        x = rng.uniform(0, TWO_PI, 2)
        target = adiabatic_field(x, fig2b_pattern, fig2_params).vector(fig2b_pattern)
        alpha = np.zeros(len(fig2b_pattern.mode_orders), dtype=complex)
        for _ in range(n_steps):
            alpha = field_step_exact(x, alpha, fig2b_pattern, fig2_params, dt)
        rel = np.abs(alpha - target) / np.maximum(np.abs(target), 1e-300)
        worst = max(worst, float(rel.max()))
    # independent cross-check on one configuration: classic RK4 on the raw
    # mode ODE reaches the same fixed point
    x = rng.uniform(0, TWO_PI, 2)
    ks, etas = fig2b_pattern.wavenumbers(), fig2b_pattern.strengths()
    s = np.sin(np.outer(ks, x))
    big_s, sig = s.sum(1), (s * s).sum(1)
    delta_eff = fig2_params.delta_c - fig2_params.u0 * sig

    def rhs(a):
        return (1j * delta_eff - fig2_params.kappa) * a - 1j * etas * big_s

    a = np.zeros(4, dtype=complex)
    h = 0.01
    for _ in range(int(round(t_end / h))):
        k1 = rhs(a)
        k2 = rhs(a + 0.5 * h * k1)
        k3 = rhs(a + 0.5 * h * k2)
        k4 = rhs(a + h * k3)
        a = a + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    target = adiabatic_field(x, fig2b_pattern, fig2_params).vector(fig2b_pattern)
    rk4_rel = float((np.abs(a - target) / np.abs(target)).max())
    worst = max(worst, rk4_rel)
    elapsed = time.time() - t0
    ok = worst < 1e-6 and elapsed < 1.0
    report(1, "adiabatic-consistency", ok, f"worst rel err {worst:.2e}, {elapsed:.2f}s")
    assert worst < 1e-6
    assert elapsed < 1.0


def test_02_null_field_order():
    """20 equally spaced particles over one mode wavelength scatter nothing."""
    worst = 0.0
    for n in (1, 5, 1003):
        eta = 0.625
        params = SystemParams(20, 1.0, 1.0, -0.005, -1.1)
        x = 0.317 + np.arange(20) * (TWO_PI / n) / 20
        sol = adiabatic_field(x, IlluminationPattern(((n, eta),)), params)
        worst = max(worst, abs(sol.amplitude_map()[n]) / eta)
    ok = worst < 1e-10
    report(2, "null-field-order", ok, f"worst |alpha|/eta {worst:.2e}")
    assert worst < 1e-10


def test_03_superradiant_scaling():
    """P_tot(N)/P_tot(1) = N^2 exactly when the denominator is held fixed."""
    eta, u0, kappa = 0.4, -0.03, 1.0
    base = None
    worst = 0.0
    for n in (1, 2, 4, 8, 16):
        params = SystemParams(n, 1.0, kappa, u0, -1.5 + u0 * n)
        p = adiabatic_field(
            np.full(n, np.pi / 2), IlluminationPattern(((1, eta),)), params
        ).intensity
        if base is None:
            base = p
        worst = max(worst, abs(p / base - n * n) / (n * n))
    ok = worst < 1e-12
    report(3, "superradiant-scaling", ok, f"worst rel dev {worst:.2e}")
    assert worst < 1e-12


def test_04_equilibria_vs_brute_force(fig2_params, fig2a_pattern, fig2a_equilibria):
    """Stable points match a 400^2 sign-change grid + flow oracle."""
    t0 = time.time()
    oracle = grid_flow_stable_points(fig2a_pattern, fig2_params, resolution=400)
    stable = [np.array(e.positions) for e in fig2a_equilibria if e.classification == "stable"]
    tol = 1e-4 * TWO_PI
    count_ok = len(stable) == len(oracle)
    pos_ok = all(min(perm_dist(s, o) for o in oracle) < tol for s in stable)
    anti_ok = True
    for e in stable:
        sines = np.sin(5 * e)
        anti_ok &= bool(np.all(np.abs(sines) > 0.9) and len(set(np.sign(sines))) == 1)
    elapsed = time.time() - t0
    ok = count_ok and pos_ok and anti_ok and elapsed < 30.0
    report(
        4,
        "equilibria-vs-brute-force",
        ok,
        f"{len(stable)} stable vs oracle {len(oracle)}, {elapsed:.1f}s",
    )
    assert count_ok and pos_ok and anti_ok
    assert elapsed < 30.0


def test_05_stability_vs_flow_oracle(fig2_params, fig2a_pattern, fig2a_equilibria):
    """Jacobian classification agrees with perturb-and-integrate, everywhere."""
    t0 = time.time()
    pts = np.array([e.positions for e in fig2a_equilibria])
    classified_stable = np.array(
        [e.classification == "stable" for e in fig2a_equilibria]
    )
    flow_stable = flow_stable_mask(pts, fig2a_pattern, fig2_params)
    agree = int((classified_stable == flow_stable).sum())
    total = len(fig2a_equilibria)

    rng = np.random.default_rng(5)
    for _ in range(20):
        n_mode = int(rng.integers(1, 7))
        params1 = SystemParams(
            1, 1.0, 1.0, float(rng.uniform(-0.2, -0.01)), float(rng.uniform(-2.0, -0.3)),
            friction=1.0,
        )
        pat1 = IlluminationPattern(((n_mode, float(rng.uniform(0.2, 0.8))),))
        eqs1 = find_equilibria(pat1, params1, resolution=64)
        pts1 = np.array([e.positions for e in eqs1])
        flow1 = flow_stable_mask(pts1, pat1, params1)
        cls1 = np.array([e.classification == "stable" for e in eqs1])
        agree += int((cls1 == flow1).sum())
        total += len(eqs1)
    elapsed = time.time() - t0
    ok = agree == total
    report(5, "stability-vs-flow-oracle", ok, f"{agree}/{total} agree, {elapsed:.1f}s")
    assert agree == total


def test_06_integrator_order_and_conservation(fig2a_pattern):
    """kappa = 0 run over t = 50/w_R: drift < 1e-6 and halving dt gains >= 4x."""
    t0 = time.time()
    params = SystemParams(2, 1.0, 0.0, -0.05, -1.1, friction=0.0)
    rng = np.random.default_rng(42)
    x0 = np.array([np.pi / 10, np.pi / 10 + 2 * np.pi / 5]) + rng.uniform(-0.08, 0.08, 2)
    p0 = rng.normal(0, 0.03, 2)
    a0 = adiabatic_field(x0, fig2a_pattern, params).vector(fig2a_pattern) * 1.03
    from cavity_adapt.dynamics import _step_full_arrays

    def energy_of(x, p, al):
        st = SystemState(
            positions=x, momenta=p, fields=tuple(zip(fig2a_pattern.mode_orders, al))
        )
        return energy(st, fig2a_pattern, params)

    e0 = energy_of(x0, p0, a0)
    drifts = {}
    for dt in (1e-3, 5e-4):
        x, p, al = np.array(x0), np.array(p0), np.array(a0)
        sample = int(round(0.1 / dt))
        drift = 0.0
        for i in range(int(round(50.0 / dt))):
            x, p, al = _step_full_arrays(x, p, al, fig2a_pattern, params, dt)
            if (i + 1) % sample == 0:
                drift = max(drift, abs(energy_of(x, p, al) - e0))
        drifts[dt] = drift / abs(e0)
    ratio = drifts[1e-3] / drifts[5e-4]
    elapsed = time.time() - t0
    ok = drifts[1e-3] < 1e-6 and ratio >= 4.0 and elapsed < 10.0
    report(
        6,
        "integrator-order-conservation",
        ok,
        f"drift {drifts[1e-3]:.2e}, halving ratio {ratio:.3f}, {elapsed:.1f}s",
    )
    assert drifts[1e-3] < 1e-6
    assert ratio >= 4.0
    assert elapsed < 10.0


def test_07_closed_loop_adaptation():
    """Periodic five-pattern cycling settles onto a repeating loop for at
    least 8 of 10 seeded initial conditions within 20 cycles."""
    t0 = time.time()

    def circ_dist(a, b):
        d = np.abs(a - b) % TWO_PI
        return np.minimum(d, TWO_PI - d).max()

    tol = 1e-3 * TWO_PI
    closed = 0
    for seed in range(10):
        cfg = validate_config(load_preset("fig3c"))
        cfg["seed"] = seed
        params, state, schedule = build_system(cfg)
        integ = IntegratorOptions.from_config(cfg["integrator"])
        traj = run_trajectory(state, schedule, params, integ, seed=seed)
        ev_times = [t for t, _ in traj.events]
        boundaries = []
        for k in range(5, len(traj.events), 5):
            i = int(np.searchsorted(traj.times, ev_times[k]))
            boundaries.append(np.array(traj.positions[min(i, traj.n_samples - 1)]))
        for k in range(len(boundaries) - 2):
            if (
                circ_dist(boundaries[k], boundaries[k + 1]) < tol
                and circ_dist(boundaries[k + 1], boundaries[k + 2]) < tol
            ):
                closed += 1
                break
    elapsed = time.time() - t0
    ok = closed >= 8 and elapsed < 120.0
    report(7, "closed-loop-adaptation", ok, f"{closed}/10 seeds closed, {elapsed:.1f}s")
    assert closed >= 8
    assert elapsed < 120.0


def test_08_noisy_residence_preference():
    """Noisy two-particle run spends its time at strong-scattering points:
    time-averaged P_tot >= 2x the random-configuration mean, margin > 3 SE,
    for at least 4 of 5 fixed seeds."""
    t0 = time.time()
    rng = np.random.default_rng(2024)
    rand_configs = rng.uniform(0, TWO_PI, size=(10_000, 2))
    passes = 0
    details = []
    for seed in (101, 102, 103, 104, 105):
        cfg = validate_config(load_preset("fig4"))
        cfg["seed"] = seed
        params, state, schedule = build_system(cfg)
        integ = IntegratorOptions.from_config(cfg["integrator"])
        noise = NoiseOptions.from_config(cfg["noise"])
        traj = run_trajectory(state, schedule, params, integ, noise, seed=seed)
        _, p_rand = adiabatic_field_batch(rand_configs, schedule.patterns[0], params)
        mean_rand = float(p_rand.mean())
        se_rand = float(p_rand.std(ddof=1)) / math.sqrt(p_rand.size)
        blocks = np.array_split(traj.p_tot, 20)
        block_means = np.array([b.mean() for b in blocks])
        se_traj = float(block_means.std(ddof=1)) / math.sqrt(len(blocks))
        margin = float(traj.p_tot.mean()) - 2.0 * mean_rand
        se = math.hypot(2.0 * se_rand, se_traj)
        passes += margin > 3.0 * se
        details.append(f"{traj.p_tot.mean() / mean_rand:.2f}x")
    elapsed = time.time() - t0
    ok = passes >= 4 and elapsed < 300.0
    report(
        8,
        "noisy-residence-preference",
        ok,
        f"{passes}/5 seeds, ratios {' '.join(details)}, {elapsed:.0f}s",
    )
    assert passes >= 4
    assert elapsed < 300.0


def test_09_adaptation_and_memory():
    """Desk-scale comb run: scattering climbs over the switch sequence, and a
    pattern re-applied to the evolved configuration outperforms its first
    application from the random start."""
    t0 = time.time()
    trend_pass = memory_pass = 0
    details = []
    for seed in (1, 2, 3, 4, 5):
        cfg = validate_config(load_preset("fig6desk"))
        cfg["seed"] = seed
        params, state, schedule = build_system(cfg)
        integ = IntegratorOptions.from_config(cfg["integrator"])
        traj = run_trajectory(state, schedule, params, integ, seed=seed)
        ev_times = [t for t, _ in traj.events][1:]
        idx = np.clip(np.searchsorted(traj.times, ev_times), 0, traj.n_samples - 1)
        switch_p = np.append(traj.p_tot[idx], traj.p_tot[-1])
        k = switch_p.size // 10
        first, last = switch_p[:k].mean(), switch_p[-k:].mean()
        trend_pass += last > first

        # memory: identical exposures (the schedule's prescribed interval)
        # of pattern #1, from the random start vs the evolved configuration
        interval = cfg["schedule"]["trigger"]["interval"]
        dt = cfg["integrator"]["dt"]
        p1 = schedule.patterns[0]

        def exposure_intensity(x0):
            x = np.array(x0, dtype=float)
            for _ in range(int(round(interval / dt))):
                x = step_overdamped(x, p1, params, dt)
            return adiabatic_field(x, p1, params).intensity

        p_first = exposure_intensity(state.positions)
        p_again = exposure_intensity(traj.final_positions())
        memory_pass += p_again > p_first
        details.append(f"[{first:.1f}->{last:.1f}|{p_first:.1f}->{p_again:.1f}]")
    elapsed = time.time() - t0
    ok = trend_pass >= 4 and memory_pass >= 4 and elapsed < 600.0
    report(
        9,
        "adaptation-and-memory",
        ok,
        f"trend {trend_pass}/5, memory {memory_pass}/5, {elapsed:.1f}s "
        + " ".join(details),
    )
    assert trend_pass >= 4
    assert memory_pass >= 4
    assert elapsed < 600.0


def test_10_cli_determinism(tmp_path):
    """Repeated cmd_run with identical config and seed emits byte-identical
    CSV files."""
    cfg = load_preset("fig4")
    cfg["integrator"]["max_time"] = 50 * cfg["noise"]["kick_interval"]
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    rc1 = main(["run", "--config", str(cfg_path), "--seed", "77", "--out", str(out1)])
    rc2 = main(["run", "--config", str(cfg_path), "--seed", "77", "--out", str(out2)])
    same_traj = (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()
    same_events = (out1 / "events.csv").read_bytes() == (out2 / "events.csv").read_bytes()
    ok = rc1 == 0 and rc2 == 0 and same_traj and same_events
    report(10, "cli-determinism", ok, "byte-identical trajectory.csv and events.csv")
    assert ok
