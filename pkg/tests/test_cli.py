import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from qsimlab import __version__
from qsimlab.cli import RunConfig, UsageError, main


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith(f"# qsimlab {__version__} config_hash=")
    return list(csv.DictReader(lines[1:]))


def read_json(path):
    return json.loads(path.read_text())


def cli(tmp_path, command, *extra):
    code = main([command, "--out", str(tmp_path), *extra])
    return code


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert cfg.steps == [5, 8] and cfg.shots == 10000 and cfg.initial == "00001"
        assert cfg.t_max == pytest.approx(4 * np.pi)

    def test_unknown_key(self):
        with pytest.raises(UsageError):
            RunConfig.from_dict({"shot": 3})

    def test_hash_changes(self):
        assert RunConfig(seed=1).config_hash() != RunConfig(seed=2).config_hash()
        assert RunConfig(seed=1).config_hash() == RunConfig(seed=1).config_hash()

    def test_validation(self):
        for bad in ({"shots": 0}, {"steps": []}, {"omega_points": 0}, {"device": "/nonexistent.json"}):
            with pytest.raises(UsageError):
                RunConfig(**bad).validate()


class TestTrotterSweep:
    def test_rows_and_initial_time(self, tmp_path):
        assert cli(tmp_path, "trotter-sweep", "--set", "n_times=3", "--set", "t_max=1.0",
                   "--set", "steps=[2]") == 0
        rows = read_csv(tmp_path / "trotter_sweep.csv")
        assert len(rows) == 3 * 5
        assert list(rows[0]) == ["t", "m", "order", "site", "value", "exact_value", "abs_error"]
        at_zero = [r for r in rows if float(r["t"]) == 0.0]
        assert [float(r["value"]) for r in at_zero] == pytest.approx([1, 0, 0, 0, 0])

    def test_noisy_mitigated_reproducible(self, tmp_path):
        args = ["--set", "n_times=2", "--set", "t_max=1.0", "--set", "steps=[2]", "--set", "noise=true",
                "--set", "confusion=true", "--set", "postselection=true", "--shots", "2000",
                "--set", "calibration_shots=2000", "--seed", "7"]
        assert cli(tmp_path / "a", "trotter-sweep", *args) == 0
        assert cli(tmp_path / "b", "trotter-sweep", *args, "--workers", "2") == 0
        a = (tmp_path / "a" / "trotter_sweep.csv").read_text()
        assert a == (tmp_path / "b" / "trotter_sweep.csv").read_text()
        rows = read_csv(tmp_path / "a" / "trotter_sweep.csv")
        total = sum(float(r["value"]) for r in rows if float(r["t"]) == 1.0)
        assert total == pytest.approx(1.0, abs=1e-9)


class TestReports:
    def test_fidelity_report(self, tmp_path):
        assert cli(tmp_path, "fidelity-report") == 0
        rows = read_csv(tmp_path / "fidelity_report.csv")
        assert len(rows) == 30
        by = {(int(r["m"]), r["pipeline"]): r for r in rows}
        for m in range(1, 11):
            f = [float(by[m, k]["est_fidelity"]) for k in ("rzx", "transpiled", "naive")]
            d = [float(by[m, k]["est_duration_ns"]) for k in ("rzx", "transpiled", "naive")]
            assert f[0] >= f[1] >= f[2] and d[0] <= d[1] <= d[2]

    def test_fidelity_report_m0(self, tmp_path):
        assert cli(tmp_path, "fidelity-report", "--set", "m_values=[0]") == 0
        rows = read_csv(tmp_path / "fidelity_report.csv")
        assert all(float(r["est_fidelity"]) == 1.0 and float(r["est_duration_ns"]) == 0.0 for r in rows)

    def test_layout(self, tmp_path):
        assert cli(tmp_path, "layout") == 0
        rows = read_csv(tmp_path / "layouts.csv")
        assert sorted(r["layout"] for r in rows) == ["0-1-3-5-4", "0-1-3-5-6", "2-1-3-5-4", "2-1-3-5-6"]
        scores = [float(r["score"]) for r in rows]
        assert scores == sorted(scores)


class TestGhz:
    def test_noiseless(self, tmp_path):
        assert cli(tmp_path, "ghz-mitigate", "--seed", "3") == 0
        rep = read_json(tmp_path / "ghz_report.json")
        for k in ("00000", "11111"):
            assert abs(rep["raw"][k] - 0.5) <= 3 * 0.005
        assert rep["meta"]["seed"] == 3

    def test_mitigated_and_postselected(self, tmp_path):
        assert cli(tmp_path, "ghz-mitigate", "--set", "noise=true", "--set", "confusion=true",
                   "--set", "postselection=true", "--seed", "5") == 0
        rep = read_json(tmp_path / "ghz_report.json")
        for k in ("00000", "11111"):
            assert abs(rep["mitigated"][k] - 0.5) < abs(rep["raw"][k] - 0.5) + 3 * rep["mitigated_stderr"][k]
        assert rep["postselection"]["retained_fraction"] < 0.1


class TestSpectra:
    def test_spectrum(self, tmp_path):
        assert cli(tmp_path, "spectrum", "--set", "n_sites=2", "--set", "defect_bond=null",
                   "--set", "initial=\"01\"") == 0
        peaks = read_json(tmp_path / "peaks.json")["peaks"]
        assert [round(p["location"], 1) for p in peaks] == [-1.0, 1.0]
        assert len(read_csv(tmp_path / "spectrum.csv")) == 4 * 256

    def test_spectroscopy(self, tmp_path):
        args = ["--set", "n_sites=2", "--set", "defect_bond=null", "--set", "initial=\"01\"",
                "--set", "omega_points=41"]
        assert cli(tmp_path / "a", "spectroscopy", *args) == 0
        assert cli(tmp_path / "b", "spectroscopy", *args, "--workers", "3") == 0
        za = [float(r["probe_z"]) for r in read_csv(tmp_path / "a" / "spectroscopy.csv")]
        zb = [float(r["probe_z"]) for r in read_csv(tmp_path / "b" / "spectroscopy.csv")]
        assert za == zb and len(za) == 41

    def test_empty_grid(self, tmp_path):
        assert cli(tmp_path, "spectroscopy", "--set", "omega_points=0") == 2
        assert not list(tmp_path.glob("*"))


class TestPrepAndLcu:
    def test_slater(self, tmp_path):
        assert cli(tmp_path, "slater-prep", "--set", "n_particles=2") == 0
        rep = read_json(tmp_path / "slater_prep.json")
        assert rep["overlap"] >= 1 - 1e-9
        assert rep["particle_number"]["mean"] == pytest.approx(2)

    def test_slater_file(self, tmp_path):
        f = tmp_path / "b.txt"
        f.write_text("1 2\n0.7071067811865476 0 0.7071067811865476 0\n")
        assert cli(tmp_path, "slater-prep", "--set", f"slater_file=\"{f}\"") == 0
        assert read_json(tmp_path / "slater_prep.json")["n_orbitals"] == 2

    def test_lcu(self, tmp_path):
        h = tmp_path / "h.txt"
        h.write_text("0.5 0 XZ\n-0.3 0 YY\n0.2 0 IZ\n")
        assert cli(tmp_path, "lcu-evolve", "--set", f"hamiltonian=\"{h}\"", "--set", "initial=\"01\"") == 0
        rep = read_json(tmp_path / "lcu_evolve.json")
        assert rep["fidelity"] >= 1 - 1e-6
        assert rep["success_probability"] == pytest.approx(rep["inverse_s_squared"], abs=1e-6)


class TestEntryPoint:
    def test_bad_config_exit_code(self, tmp_path):
        assert cli(tmp_path, "layout", "--config", str(tmp_path / "missing.json")) == 2
        assert cli(tmp_path, "layout", "--set", "nonsense=1") == 2

    def test_config_file_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"seed": 11, "shots": 500}))
        assert cli(tmp_path, "ghz-mitigate", "--config", str(cfg), "--seed", "12") == 0
        rep = read_json(tmp_path / "ghz_report.json")
        assert rep["meta"]["seed"] == 12 and rep["shots"] == 500

    def test_bit_for_bit(self, tmp_path):
        for d in ("x", "y"):
            assert cli(tmp_path / d, "ghz-mitigate", "--set", "noise=true", "--set", "confusion=true") == 0
        assert (tmp_path / "x" / "ghz_report.json").read_bytes() == (tmp_path / "y" / "ghz_report.json").read_bytes()

    def test_module_invocation(self, tmp_path):
        out = subprocess.run([sys.executable, "-m", "qsimlab", "layout", "--out", str(tmp_path)],
                             capture_output=True, text=True, check=True)
        assert out.stdout.strip().endswith("layouts.csv")
        assert not list(tmp_path.glob("*.partial"))
