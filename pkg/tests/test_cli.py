import csv
import json

import numpy as np
import pytest

from coiso.cli import ConfigError, main, parse_config

MINIMAL = """
problem = "hopf-gravity"
mode = "rattle"
initial = "z_a"
emit = ["energy"]
"""


class TestParseConfig:
    def test_minimal_toml_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.problem == "hopf-gravity"
        assert cfg.underlying == "implicit-midpoint"
        assert cfg.h == 0.1
        assert cfg.steps == 1000
        assert cfg.emit == ("energy",)

    def test_json_accepted(self):
        cfg = parse_config(json.dumps({
            "problem": "pendulum", "mode": "shake",
            "initial": [1.0, 0.0, 0.0, 0.5], "emit": ["trajectory"],
        }))
        assert cfg.problem == "pendulum"
        assert cfg.initial == [1.0, 0.0, 0.0, 0.5]

    def test_all_violations_reported_at_once(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps({
                "problem": "kepler", "mode": "leapfrog",
                "h": -0.1, "steps": -3, "emit": [],
            }))
        text = "\n".join(exc.value.problems)
        for needle in ("problem", "mode", "h", "steps", "emit", "initial"):
            assert needle in text

    def test_garbage_document(self):
        with pytest.raises(ConfigError):
            parse_config("{{{not a config")

    def test_convergence_emit_requires_table(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(json.dumps({
                "problem": "pendulum", "mode": "rattle",
                "initial": [1.0, 0.0, 0.0, 0.5], "emit": ["convergence"],
            }))
        assert any("convergence" in p for p in exc.value.problems)

    def test_problem_params_table(self):
        cfg = parse_config(json.dumps({
            "problem": {"name": "hopf-gravity", "gv": [1.0, 0.0]},
            "mode": "rattle", "initial": "z_a", "emit": ["energy"],
        }))
        assert cfg.problem_params == {"gv": [1.0, 0.0]}


class TestMain:
    def write(self, tmp_path, text):
        p = tmp_path / "run.toml"
        p.write_text(text)
        return p

    def test_list_problems(self, capsys):
        assert main(["list-problems"]) == 0
        out = capsys.readouterr().out
        assert "hopf-gravity" in out and "pendulum" in out

    def test_run_emits_files_and_report(self, tmp_path):
        cfgfile = self.write(tmp_path, MINIMAL + "steps = 20\n")
        rc = main(["run", str(cfgfile), "--output-dir", str(tmp_path / "out"),
                   "--emit", "trajectory,energy,residuals"])
        assert rc == 0
        out = tmp_path / "out"
        for fname in ("trajectory.csv", "energy.csv", "residuals.csv", "report.json"):
            assert (out / fname).exists(), fname
        with open(out / "trajectory.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][:2] == ["step", "q0"]
        assert len(rows) == 22  # header + initial record + 20 steps
        report = json.loads((out / "report.json").read_text())
        assert report["error"] is None
        assert report["config_echo"]["problem"] == "hopf-gravity"
        # residuals stay at Newton scale throughout
        with open(out / "residuals.csv") as fh:
            rrows = list(csv.reader(fh))[1:]
        assert max(float(r[1]) for r in rrows) < 1e-9

    def test_run_hopf_projection_output(self, tmp_path):
        cfgfile = self.write(tmp_path, MINIMAL + "steps = 10\n")
        rc = main(["run", str(cfgfile), "--output-dir", str(tmp_path / "out"),
                   "--emit", "hopf"])
        assert rc == 0
        with open(tmp_path / "out" / "hopf.csv") as fh:
            rows = list(csv.reader(fh))[1:]
        assert len(rows) == 11
        # image points stay inside the closed unit disc of the chart scale
        pts = np.array([[float(r[1]), float(r[2])] for r in rows])
        assert np.all(np.isfinite(pts))

    def test_failed_run_reports_step(self, tmp_path):
        text = """
problem = "degenerate-index5"
mode = "shake"
initial = [0.3, 0.0, 0.2, 0.1]
steps = 5
emit = ["trajectory"]
"""
        cfgfile = self.write(tmp_path, text)
        rc = main(["run", str(cfgfile), "--output-dir", str(tmp_path / "out")])
        assert rc == 2
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["error"]["step"] == 1
        assert report["error"]["cause"] in (
            "SpuriousSolution", "SingularJacobian", "NonConvergence")

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        cfgfile = self.write(tmp_path, 'problem = "kepler"\n')
        assert main(["run", str(cfgfile)]) == 1
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "absent.toml")]) == 3

    def test_check_passes_on_good_problem(self, tmp_path, capsys):
        cfgfile = self.write(tmp_path, MINIMAL)
        assert main(["check", str(cfgfile), "--seed", "3"]) == 0
        out = capsys.readouterr().out
        assert "coisotropy" in out

    def test_check_fails_on_degenerate(self, tmp_path, capsys):
        text = """
problem = "degenerate-index5"
mode = "shake"
initial = [0.0, 0.0, 0.2, 0.1]
emit = ["structure-report"]
"""
        cfgfile = self.write(tmp_path, text)
        assert main(["check", str(cfgfile)]) == 2

    def test_convergence_emission(self, tmp_path):
        text = """
problem = "pendulum"
mode = "rattle"
initial = [1.0, 0.0, 0.0, 0.5]
steps = 10
emit = ["convergence"]

[convergence]
h_list = [0.1, 0.05]
T = 1.0
"""
        cfgfile = self.write(tmp_path, text)
        rc = main(["run", str(cfgfile), "--output-dir", str(tmp_path / "out")])
        assert rc == 0
        with open(tmp_path / "out" / "convergence.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "h"
        assert len(rows) >= 3
