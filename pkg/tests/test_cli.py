import json
import math
import os

import numpy as np
import pytest

from cavity_adapt.cli import main
from cavity_adapt.equilibria import find_equilibria
from cavity_adapt.model import IlluminationPattern, SystemParams, build_system
from cavity_adapt.output import fmt
from cavity_adapt.presets import load_preset


def quick_run_config(seed=9, max_time=3.0):
    return {
        "unit": "kappa",
        "system": {"n_particles": 2, "kappa": 1.0, "u0": -0.05, "delta_c": -1.1, "friction": 1.0},
        "patterns": {"main": [{"mode_order": 5, "eta": 0.625}]},
        "schedule": {
            "mode": "static",
            "patterns": ["main"],
            "max_switches": 1,
            "trigger": {"kind": "fixed_interval", "interval": 1e9},
        },
        "integrator": {"scheme": "overdamped", "dt": 0.01, "max_time": max_time,
                       "sample_stride": 5},
        "noise": {"enabled": False},
        "seed": seed,
    }


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestFloatFormat:
    def test_round_trip_17_digits(self):
        for v in (math.pi, 1 / 3, 0.78125, 1e-300, -2.5e17):
            assert float(fmt(v)) == v

    def test_decimal_separator(self):
        assert "." in fmt(0.5)
        assert "," not in fmt(12345.678)


class TestCmdEquilibria:
    def test_fig2a_outputs(self, tmp_path, fig2_params, fig2a_pattern):
        out = tmp_path / "eq"
        rc = main(["equilibria", "--preset", "fig2a", "--out", str(out), "--resolution", "50"])
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest["outputs"]) == {"equilibria.csv", "landscape.csv"}
        assert manifest["stable_count"] == 30
        header = (out / "equilibria.csv").read_text().splitlines()[0]
        assert header == "x_1,x_2,classification,P_tot,eig_re_1,eig_re_2"
        land_header = (out / "landscape.csv").read_text().splitlines()[0]
        assert land_header == "x_1,x_2,P_tot,I_n5,F_1,F_2"
        # stable rows match the library result
        eqs = find_equilibria(fig2a_pattern, fig2_params, resolution=50)
        stable_lib = sorted(
            tuple(e.positions) for e in eqs if e.classification == "stable"
        )
        rows = [l.split(",") for l in (out / "equilibria.csv").read_text().splitlines()[1:]]
        stable_csv = sorted(
            (float(r[0]), float(r[1])) for r in rows if r[2] == "stable"
        )
        assert len(stable_csv) == len(stable_lib)
        for a, b in zip(stable_csv, stable_lib):
            assert a == pytest.approx(b, abs=1e-9)

    def test_zero_pump_degenerate_error(self, tmp_path, capsys):
        cfg = quick_run_config()
        cfg["patterns"] = {"main": [{"mode_order": 5, "eta": 0.0}]}
        rc = main(["equilibria", "--config", write_config(tmp_path, cfg),
                   "--out", str(tmp_path / "o")])
        assert rc == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "DegenerateLandscape"
        assert not (tmp_path / "o" / "manifest.json").exists()

    def test_fig3a_three_column_csv(self, tmp_path):
        out = tmp_path / "f3a"
        rc = main(["equilibria", "--preset", "fig3a", "--out", str(out), "--resolution", "16"])
        assert rc == 0
        lines = (out / "equilibria.csv").read_text().splitlines()
        assert lines[0] == "x_1,x_2,x_3,classification,P_tot,eig_re_1,eig_re_2,eig_re_3"
        assert len(lines) > 1
        assert not (out / "landscape.csv").exists()  # N = 3: equilibria only

    def test_rejects_large_n(self, tmp_path, capsys):
        cfg = quick_run_config()
        cfg["system"]["n_particles"] = 5
        rc = main(["equilibria", "--config", write_config(tmp_path, cfg),
                   "--out", str(tmp_path / "o")])
        assert rc == 1


class TestCmdRun:
    def test_outputs_and_manifest(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["run", "--config", write_config(tmp_path, quick_run_config()),
                   "--out", str(out)])
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["outputs"] == ["trajectory.csv", "events.csv"]
        assert manifest["seed"] == 9
        header = (out / "trajectory.csv").read_text().splitlines()[0]
        assert header == "t,x_1,x_2,p_1,p_2,P_tot,Theta_tot,N0,N0_pairs,pattern_id"
        assert (out / "events.csv").read_text().splitlines()[0] == "t,pattern_id"

    def test_byte_identical_reruns(self, tmp_path):
        cfg_path = write_config(tmp_path, quick_run_config())
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", cfg_path, "--out", str(out1)]) == 0
        assert main(["run", "--config", cfg_path, "--out", str(out2)]) == 0
        assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()
        assert (out1 / "events.csv").read_bytes() == (out2 / "events.csv").read_bytes()

    def test_seed_override_changes_output(self, tmp_path):
        cfg_path = write_config(tmp_path, quick_run_config())
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", cfg_path, "--out", str(out1)]) == 0
        assert main(["run", "--config", cfg_path, "--seed", "123", "--out", str(out2)]) == 0
        assert (out1 / "trajectory.csv").read_bytes() != (out2 / "trajectory.csv").read_bytes()

    def test_manifest_snapshot_round_trips(self, tmp_path):
        out1 = tmp_path / "a"
        assert main(["run", "--config", write_config(tmp_path, quick_run_config()),
                     "--out", str(out1)]) == 0
        snapshot = json.loads((out1 / "manifest.json").read_text())["config"]
        out2 = tmp_path / "b"
        assert main(["run", "--config", write_config(tmp_path, snapshot, "snap.json"),
                     "--out", str(out2)]) == 0
        assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()

    def test_failure_removes_partial_outputs(self, tmp_path, capsys):
        cfg = quick_run_config()
        cfg["schedule"]["trigger"] = {"kind": "stationarity", "tol_v": 0.0, "tol_f": 0.0,
                                      "window": 3, "check_stride": 5, "min_dwell": 0,
                                      "timeout": 0.5}
        out = tmp_path / "fail"
        rc = main(["run", "--config", write_config(tmp_path, cfg), "--out", str(out)])
        assert rc == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "ScheduleStall"
        assert not (out / "manifest.json").exists()
        assert not (out / "trajectory.csv").exists()

    def test_invalid_config_error_json(self, tmp_path, capsys):
        cfg = quick_run_config()
        cfg["mystery"] = 1
        rc = main(["run", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path / "o")])
        assert rc == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "ConfigError"
        assert "mystery" in err["message"]


class TestCmdEnsemble:
    def test_single_run_aggregate_matches(self, tmp_path):
        out = tmp_path / "ens"
        rc = main(["ensemble", "--config", write_config(tmp_path, quick_run_config()),
                   "--out", str(out), "--runs", "1"])
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["runs"] == 1
        per = summary["per_run"][0]
        assert summary["final"]["P_tot"]["mean"] == per["final_P_tot"]
        assert summary["final"]["P_tot"]["std"] == 0.0
        traj = (out / "run_000_trajectory.csv").read_text().splitlines()
        last = traj[-1].split(",")
        assert float(last[5]) == pytest.approx(per["final_P_tot"], rel=1e-15)

    def test_master_seed_reproducible_and_parallel_invariant(self, tmp_path):
        cfg_path = write_config(tmp_path, quick_run_config())
        out1, out2 = tmp_path / "s", tmp_path / "p"
        assert main(["ensemble", "--config", cfg_path, "--out", str(out1), "--runs", "3"]) == 0
        env_before = os.environ.get("CAVITY_ADAPT_THREADS")
        os.environ["CAVITY_ADAPT_THREADS"] = "3"
        try:
            assert main(["ensemble", "--config", cfg_path, "--out", str(out2), "--runs", "3"]) == 0
        finally:
            if env_before is None:
                os.environ.pop("CAVITY_ADAPT_THREADS", None)
            else:
                os.environ["CAVITY_ADAPT_THREADS"] = env_before
        assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()
        for i in range(3):
            name = f"run_{i:03d}_trajectory.csv"
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_run_seeds_differ(self, tmp_path):
        out = tmp_path / "ens"
        assert main(["ensemble", "--config", write_config(tmp_path, quick_run_config()),
                     "--out", str(out), "--runs", "3"]) == 0
        summary = json.loads((out / "summary.json").read_text())
        seeds = [r["seed"] for r in summary["per_run"]]
        assert len(set(seeds)) == 3


class TestPresets:
    def test_all_presets_validate(self):
        from cavity_adapt.model import validate_config

        for name in ("fig2a", "fig2b", "fig2c", "fig3a", "fig3b", "fig3c", "fig4",
                     "fig6desk", "fig6full"):
            cfg = validate_config(load_preset(name))
            build_system(cfg)

    def test_fig4_parameter_set(self):
        cfg = load_preset("fig4")
        pi2 = math.pi**2
        assert cfg["unit"] == "omega_r"
        sys_ = cfg["system"]
        assert sys_["kappa"] == pytest.approx(10 / pi2)
        assert sys_["u0"] == pytest.approx(-5 / pi2)
        assert sys_["delta_c"] == pytest.approx(2 * (-5 / pi2) / 2 - 2 * 10 / pi2)
        assert sys_["friction"] == pytest.approx(20 / pi2)
        assert cfg["noise"]["kick_interval"] == pytest.approx(pi2 / 5)
        orders = [e["mode_order"] for e in cfg["patterns"]["main"]]
        assert orders == [1, 3, 4, 5, 7]

    def test_fig6desk_comb(self):
        cfg = load_preset("fig6desk")
        assert cfg["system"]["n_particles"] == 30
        assert cfg["system"]["u0"] == pytest.approx(-1 / 30)
        all_modes = set()
        for entries in cfg["patterns"].values():
            assert len(entries) == 5
            for e in entries:
                assert (e["mode_order"] - 1003) % 7 == 0
                assert 1003 <= e["mode_order"] <= 1066
                all_modes.add(e["mode_order"])
        # no mode is shared by all five patterns
        shared = set.intersection(*[
            {e["mode_order"] for e in entries} for entries in cfg["patterns"].values()
        ])
        assert not shared

    def test_unknown_preset(self):
        from cavity_adapt.model import ConfigError

        with pytest.raises(ConfigError):
            load_preset("fig99")
