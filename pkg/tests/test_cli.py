"""Command-line interface: flags, config files, artifacts, error paths."""

import json

import pytest

from qct.cli import main
from qct.experiments import ExperimentConfig


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


TINY_DUFFING = ("--t-final", "0.05", "--seed", "3")
TINY_ROTOR = (
    "--n-kicks", "1", "--closed-kicks", "2", "--dt", "1e-3",
    "--sample-interval", "1e-2", "--quantum-ensemble", "2",
    "--classical-ensemble", "16", "--seed", "3",
)


class TestRunDuffing:
    def test_writes_artifacts_and_prints_a_manifest(self, tmp_path, capsys):
        code, out, err = run_cli(
            capsys, "run-duffing", *TINY_DUFFING,
            "--output-dir", str(tmp_path / "out"),
        )
        assert code == 0
        assert err == ""
        manifest = json.loads(out)
        assert manifest["output_dir"] == str(tmp_path / "out")
        assert manifest["summary"]["experiment"] == "duffing"
        assert (tmp_path / "out" / "summary.json").is_file()
        assert (tmp_path / "out" / "records.csv").is_file()

    def test_flags_override_the_config_file(self, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"t_final": 0.05, "seed": 5}))
        code, out, _ = run_cli(
            capsys, "run-duffing", "--config", str(config_path),
            "--seed", "7", "--output-dir", str(tmp_path / "out"),
        )
        assert code == 0
        echoed = ExperimentConfig.from_json(
            (tmp_path / "out" / "config.json").read_text()
        )
        assert echoed.t_final == 0.05
        assert echoed.seed == 7

    def test_env_var_locates_the_output(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("QCT_OUTPUT_DIR", str(tmp_path / "base"))
        code, out, _ = run_cli(
            capsys, "run-duffing", "--t-final", "0"
        )
        assert code == 0
        manifest = json.loads(out)
        assert manifest["output_dir"] == str(tmp_path / "base" / "duffing")

    def test_bad_efficiency_reports_machine_readable_error(
        self, tmp_path, capsys
    ):
        code, out, err = run_cli(
            capsys, "run-duffing", "--etas", "2.0",
            "--output-dir", str(tmp_path / "out"),
        )
        assert code == 1
        payload = json.loads(err)
        assert payload["error"] == "ConfigError"
        assert "(0, 1]" in payload["message"]

    def test_unknown_config_field_reports_an_error(self, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"strength": 1.0}))
        code, _, err = run_cli(
            capsys, "run-duffing", "--config", str(config_path)
        )
        assert code == 1
        assert json.loads(err)["error"] == "ConfigError"

    def test_malformed_config_file_reports_an_error(self, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text("{nope")
        code, _, err = run_cli(
            capsys, "run-duffing", "--config", str(config_path)
        )
        assert code == 1
        assert json.loads(err)["error"] == "ConfigError"

    def test_missing_config_file_reports_an_error(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "run-duffing", "--config", str(tmp_path / "absent.json")
        )
        assert code == 1
        assert "cannot read config file" in json.loads(err)["message"]


class TestRunRotor:
    def test_tiny_rotor_run(self, tmp_path, capsys):
        code, out, err = run_cli(
            capsys, "run-rotor", *TINY_ROTOR,
            "--output-dir", str(tmp_path / "out"),
        )
        assert code == 0, err
        manifest = json.loads(out)
        assert manifest["summary"]["experiment"] == "rotor"
        assert "energy_closed" in manifest["artifacts"]

    def test_model_defaults_to_the_rotor(self, tmp_path, capsys):
        code, _, _ = run_cli(
            capsys, "run-rotor", "--n-kicks", "0",
            "--output-dir", str(tmp_path / "out"),
        )
        assert code == 0
        echoed = ExperimentConfig.from_json(
            (tmp_path / "out" / "config.json").read_text()
        )
        assert echoed.model == "kicked_rotor"


class TestAnalyzeRegime:
    def test_prints_a_margin_table(self, capsys):
        code, out, err = run_cli(capsys, "analyze-regime")
        assert code == 0
        assert "verdict: classical" in out
        assert "localization" in out
        assert "tracking" in out

    def test_json_output(self, capsys):
        code, out, _ = run_cli(capsys, "analyze-regime", "--json")
        assert code == 0
        report = json.loads(out)
        assert report["verdict"] == "classical"
        assert report["margins"]["low_noise_window_lower"]["satisfied"] is True

    def test_quantum_point_is_flagged(self, capsys):
        code, out, _ = run_cli(
            capsys, "analyze-regime", "--hbar", "1.0", "--k", "1e-2"
        )
        assert code == 0
        assert "verdict: non-classical" in out

    def test_margin_factor_flag_tightens_the_verdict(self, capsys):
        code, out, _ = run_cli(
            capsys, "analyze-regime", "--margin-factor", "1e9"
        )
        assert code == 0
        assert "verdict: marginal" in out


class TestReplayRecords:
    def test_replays_a_stored_record_file(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "run-duffing", *TINY_DUFFING,
            "--output-dir", str(tmp_path / "run"),
        )
        assert code == 0, err
        capsys.readouterr()
        code, out, err = run_cli(
            capsys, "replay-records",
            "--records", str(tmp_path / "run" / "records.csv"),
            *TINY_DUFFING, "--output-dir", str(tmp_path / "replay"),
        )
        assert code == 0, err
        manifest = json.loads(out)
        assert manifest["summary"]["experiment"] == "replay"
        assert (tmp_path / "replay" / "widths.csv").is_file()

    def test_missing_records_file_is_an_error(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "replay-records",
            "--records", str(tmp_path / "absent.csv"),
            "--output-dir", str(tmp_path / "replay"),
        )
        assert code == 1
        assert json.loads(err)["error"] != ""


class TestParser:
    def test_subcommand_is_required(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_bad_eta_syntax_is_a_usage_error(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["run-duffing", "--etas", "fast"])
        assert excinfo.value.code == 2
