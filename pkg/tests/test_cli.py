import json
import subprocess
import sys

import pytest

from mtt_fisher import cli
from mtt_fisher.errors import NumericalCollapseError
from mtt_fisher.experiments import CSV_COLUMNS, EXPERIMENTS


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


SMALL_FALSE_ALARM = {
    "experiment": "false-alarm",
    "seed": 11,
    "params": {"rates": [0.5, 2.0], "uniform_halfwidths": [5], "n_samples": 2000},
}


class TestValidate:
    def test_ok_prints_resolved_defaults(self, tmp_path, capsys):
        path = write_config(tmp_path, SMALL_FALSE_ALARM)
        assert cli.main(["validate", path]) == 0
        out = capsys.readouterr().out
        assert out.startswith("OK")
        resolved = json.loads(out[len("OK") :])
        assert resolved["params"]["theta_star"] == 1.0
        assert resolved["params"]["rates"] == [0.5, 2.0]

    def test_unknown_experiment_named_in_error(self, tmp_path, capsys):
        path = write_config(tmp_path, {"experiment": "spectral-gap", "seed": 1})
        assert cli.main(["validate", path]) == 2
        assert "spectral-gap" in capsys.readouterr().err

    def test_missing_seed(self, tmp_path, capsys):
        path = write_config(tmp_path, {"experiment": "false-alarm"})
        assert cli.main(["validate", path]) == 2
        assert "seed required" in capsys.readouterr().err

    def test_unknown_parameter_rejected(self, tmp_path, capsys):
        bad = dict(SMALL_FALSE_ALARM, params={"rate_grid": [1.0]})
        path = write_config(tmp_path, bad)
        assert cli.main(["validate", path]) == 2
        assert "rate_grid" in capsys.readouterr().err

    def test_unknown_top_level_field_rejected(self, tmp_path):
        bad = dict(SMALL_FALSE_ALARM, output="x.csv")
        path = write_config(tmp_path, bad)
        assert cli.main(["validate", path]) == 2

    def test_unreadable_config(self, tmp_path):
        assert cli.main(["validate", str(tmp_path / "missing.json")]) == 2
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli.main(["validate", str(bad)]) == 2


class TestRun:
    def test_writes_results_and_manifest(self, tmp_path, capsys):
        path = write_config(tmp_path, SMALL_FALSE_ALARM)
        out_dir = tmp_path / "out"
        assert cli.main(["run", path, "--out", str(out_dir)]) == 0
        lines = (out_dir / "results.csv").read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) > 1
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["seed"] == 11
        assert manifest["config"]["experiment"] == "false-alarm"
        # manifest config round-trips through the resolver unchanged
        assert cli.resolve_config(manifest["config"]) == manifest["config"]

    def test_rerun_is_bit_identical(self, tmp_path):
        path = write_config(tmp_path, SMALL_FALSE_ALARM)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["run", path, "--out", str(out_a)]) == 0
        assert cli.main(["run", path, "--out", str(out_b)]) == 0
        assert (out_a / "results.csv").read_bytes() == (out_b / "results.csv").read_bytes()

    def test_threads_do_not_change_results(self, tmp_path):
        path = write_config(tmp_path, SMALL_FALSE_ALARM)
        out_a, out_b = tmp_path / "serial", tmp_path / "parallel"
        assert cli.main(["run", path, "--out", str(out_a), "--threads", "1"]) == 0
        assert cli.main(["run", path, "--out", str(out_b), "--threads", "3"]) == 0
        assert (out_a / "results.csv").read_bytes() == (out_b / "results.csv").read_bytes()

    def test_scale_shrinks_samples(self, tmp_path):
        path = write_config(tmp_path, SMALL_FALSE_ALARM)
        out_dir = tmp_path / "scaled"
        assert cli.main(["run", path, "--out", str(out_dir), "--scale", "0.1"]) == 0
        rows = (out_dir / "results.csv").read_text().splitlines()[1:]
        counts = {int(r.split(",")[7]) for r in rows if not r.split(",")[1].endswith("closed-form")}
        assert counts == {200}

    def test_env_threads_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MTT_FISHER_THREADS", "2")
        path = write_config(tmp_path, SMALL_FALSE_ALARM)
        out_dir = tmp_path / "env"
        assert cli.main(["run", path, "--out", str(out_dir)]) == 0
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["threads"] == 2

    def test_collapse_maps_to_exit_3(self, tmp_path, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise NumericalCollapseError("weights vanished")

        monkeypatch.setattr(cli, "run_experiment", boom)
        path = write_config(tmp_path, SMALL_FALSE_ALARM)
        assert cli.main(["run", path, "--out", str(tmp_path / "o")]) == 3
        assert "collapse" in capsys.readouterr().err


class TestCatalog:
    def test_lists_all_experiments(self, capsys):
        assert cli.main(["list-experiments"]) == 0
        out = capsys.readouterr().out
        for name in EXPERIMENTS:
            assert name in out

    def test_console_script_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "mtt_fisher.cli", "list-experiments"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "false-alarm" in proc.stdout


class TestPropertySuite:
    def test_all_properties_pass(self, tmp_path):
        config = {"experiment": "property-suite", "seed": 3, "params": {"n_samples": 4000}}
        path = write_config(tmp_path, config)
        out_dir = tmp_path / "props"
        assert cli.main(["run", path, "--out", str(out_dir)]) == 0
        rows = [r.split(",") for r in (out_dir / "results.csv").read_text().splitlines()[1:]]
        passes = [(r[1], float(r[5])) for r in rows if r[4] == "pass"]
        assert len(passes) >= 6
        assert all(v == 1.0 for _, v in passes), passes
