import csv
import io
import json
import os
import subprocess
import sys

import pytest

from dslt_lab.cli import main, rerender_report
from dslt_lab.manifest import MANIFEST_NAME, verify_manifest

SUPER = "hurst = 0.75\ndim = 2\neps_sweep = 0.1, 0.05\nreplications = 120\nseed = 11\n"
CRIT = "hurst = 0.375\ndim = 3\nchaos_m_max = 5\n"


@pytest.fixture
def cfg(tmp_path):
    def write(text, name="run.cfg"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return write


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert main(["constants", "--bogus"]) == 1

    def test_no_command(self, capsys):
        assert main([]) == 1

    def test_missing_config(self, tmp_path, capsys):
        assert main(["constants", "--config", str(tmp_path / "none.cfg")]) == 3

    def test_invalid_config(self, cfg, capsys):
        assert main(["constants", "--config", cfg("hurst = 7\ndim = 2\n")]) == 1
        assert "hurst" in capsys.readouterr().err

    def test_needs_config(self, capsys):
        assert main(["clt", "--out", "x"]) == 1

    def test_bad_seed(self, cfg, capsys):
        assert main(["clt", "--config", cfg(SUPER), "--seed", "-3", "--out", "x"]) == 1

    def test_out_not_writable(self, cfg, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["simulate", "--config", cfg(SUPER), "--steps", "8", "--out", str(blocker / "sub")]) == 3

    def test_out_of_regime_constants(self, cfg, capsys):
        assert main(["constants", "--config", cfg("hurst = 0.3\ndim = 3\n")]) == 1

    def test_not_converged(self, cfg, monkeypatch, capsys):
        import dslt_lab.cli as cli

        # a single refinement level has no error estimate, hence never converges
        monkeypatch.setattr(cli, "SIMPLEX_SPEC", cli.SIMPLEX_SPEC.with_(base_level=3, max_level=3))
        assert main(["constants", "--config", cfg(CRIT), "--quiet"]) == 2
        assert "false" in capsys.readouterr().out

    def test_version(self, capsys):
        assert main(["--version"]) == 0


class TestConstants:
    def test_supercritical_row(self, cfg, capsys):
        assert main(["constants", "--config", cfg(SUPER), "--quiet"]) == 0
        out = rows(capsys.readouterr().out)
        assert list(out[0]) == ["quantity", "H", "d", "t", "eps", "value", "error_estimate", "converged"]
        first = out[0]
        assert first["quantity"] == "sigma_squared"
        assert f"{float(first['value']):.8f}" == "0.00925926"
        by = {r["quantity"]: r for r in out}
        assert float(by["sigma_squared_integral"]["value"]) == pytest.approx(float(by["sigma_squared_limit"]["value"]), rel=1e-6)
        assert all(r["converged"] == "true" for r in out)

    def test_critical_table(self, cfg, tmp_path, capsys):
        out = tmp_path / "c"
        assert main(["constants", "--config", cfg(CRIT), "--out", str(out), "--quiet"]) == 0
        table = rows((out / "constants.csv").read_text())
        names = [r["quantity"] for r in table]
        assert names == ["bar_sigma_squared"] + [f"bar_sigma_m[{m}]" for m in range(1, 6)]
        assert verify_manifest(out) == []

    def test_at_eps_rows(self, cfg, capsys):
        text = "hurst = 0.75\ndim = 2\neps_sweep = 0.5\nchaos_m_max = 3\n"
        assert main(["constants", "--config", cfg(text), "--at-eps", "--quiet"]) == 0
        names = [r["quantity"] for r in rows(capsys.readouterr().out)]
        assert "total_variance" in names and "chaos_variance[3]" in names


class TestChaos:
    def test_identity_table(self, capsys):
        assert main(["chaos", "--m-max", "6", "--d-max", "5"]) == 0
        table = rows(capsys.readouterr().out)
        assert len(table) == 30
        assert all(r["equal"] == "true" and r["brute_force"] == r["closed_form"] for r in table)

    def test_consistency(self, cfg, tmp_path, capsys):
        text = "hurst = 0.45\ndim = 3\nchaos_m_max = 4\n"
        out = tmp_path / "ch"
        assert main(["chaos", "--config", cfg(text), "--m-max", "2", "--d-max", "2", "--consistency-eps", "0.5", "--out", str(out)]) == 0
        table = rows((out / "chaos_vs_total.csv").read_text())
        gaps = [float(r["relative_gap"]) for r in table]
        assert len(gaps) == 4 and gaps == sorted(gaps, reverse=True)
        assert verify_manifest(out) == []


class TestSimulate:
    def test_paths_and_manifest(self, cfg, tmp_path, capsys):
        out = tmp_path / "sim"
        assert main(["simulate", "--config", cfg(SUPER), "--eps", "0.1", "--paths", "2", "--out", str(out), "--quiet"]) == 0
        files = sorted(os.listdir(out))
        assert files == [MANIFEST_NAME, "path_0000.csv", "path_0001.csv"]
        man = json.loads((out / MANIFEST_NAME).read_text())
        assert man["master_seed"] == 11 and man["command"] == "simulate"
        assert man["config_echo"]["steps"] == 32
        assert verify_manifest(out) == []
        (out / "path_0001.csv").write_text("tampered\n")
        assert verify_manifest(out) == ["path_0001.csv"]


class TestClt:
    def run(self, cfg_path, out, threads, env=None):
        argv = ["clt", "--config", cfg_path, "--out", str(out), "--quiet"]
        if threads is not None:
            argv += ["--threads", str(threads)]
        return main(argv)

    def test_byte_identical_across_threads(self, cfg, tmp_path, capsys):
        path = cfg(SUPER)
        assert self.run(path, tmp_path / "a", 1) == 0
        assert self.run(path, tmp_path / "b", 3) == 0
        assert (tmp_path / "a" / "samples.csv").read_bytes() == (tmp_path / "b" / "samples.csv").read_bytes()
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()

    def test_env_threads(self, cfg, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("DSLT_LAB_THREADS", "2")
        assert self.run(cfg(SUPER), tmp_path / "e", None) == 0
        monkeypatch.setenv("DSLT_LAB_THREADS", "zero")
        assert self.run(cfg(SUPER), tmp_path / "f", None) == 1

    def test_seed_override(self, cfg, tmp_path, capsys):
        path = cfg(SUPER)
        assert main(["clt", "--config", path, "--seed", "12", "--out", str(tmp_path / "s"), "--quiet"]) == 0
        assert self.run(path, tmp_path / "t", 1) == 0
        assert (tmp_path / "s" / "samples.csv").read_bytes() != (tmp_path / "t" / "samples.csv").read_bytes()
        assert json.loads((tmp_path / "s" / MANIFEST_NAME).read_text())["master_seed"] == 12

    def test_report_rerender(self, cfg, tmp_path, capsys):
        out = tmp_path / "r"
        assert self.run(cfg(SUPER), out, 1) == 0
        original = json.loads((out / "report.json").read_text())
        again = rerender_report(out)
        for a, b in zip(original["per_eps"], again["per_eps"]):
            for key, val in a.items():
                if isinstance(val, float):
                    assert b[key] == pytest.approx(val, rel=1e-12, abs=1e-300)
        capsys.readouterr()
        assert main(["report", str(out)]) == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed["per_eps"][0]["sample_variance"] == pytest.approx(original["per_eps"][0]["sample_variance"], rel=1e-12)
        assert verify_manifest(out) == []

    def test_report_missing_dir(self, tmp_path, capsys):
        assert main(["report", str(tmp_path / "nothing")]) == 3


class TestExistence:
    def test_probe(self, cfg, tmp_path, capsys):
        text = "hurst = 0.45\ndim = 3\neps_sweep = 0.4, 0.2\nreplications = 100\n"
        out = tmp_path / "x"
        argv = ["existence", "--config", cfg(text), "--hurst-list", "0.3,0.45", "--check-eps", "0.4", "--out", str(out), "--quiet"]
        assert main(argv) == 0
        res = json.loads((out / "existence.json").read_text())
        assert [e["hurst"] for e in res["entries"]] == [0.3, 0.45]
        assert "within_3_ci" in res["entries"][0]["quadrature_check"]
        assert verify_manifest(out) == []

    def test_bad_list(self, cfg, tmp_path, capsys):
        text = "hurst = 0.45\ndim = 3\neps_sweep = 0.4, 0.2\nreplications = 100\n"
        assert main(["existence", "--config", cfg(text), "--hurst-list", "a,b", "--out", str(tmp_path)]) == 1


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dslt_lab.cli", "chaos", "--m-max", "1", "--d-max", "1"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines() == ["m,d,brute_force,closed_form,equal", "1,1,2,2,true"]
