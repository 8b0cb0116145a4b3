"""Command-line surface: exit codes, overrides and written files."""

import json

import pytest
from click.testing import CliRunner

from quantcoop.experiment import load_config
from quantcoop.main import cli

COMPLETE3 = [[i, j] for i in range(1, 4) for j in range(1, 4) if i != j]


@pytest.fixture
def runner():
    return CliRunner()


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0


def test_analyze_preset(runner, tmp_path):
    result = runner.invoke(cli, ["analyze", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "Detectable" in result.output
    report = json.loads((tmp_path / "analysis.json").read_text(encoding="utf-8"))
    assert report["detectable"] and report["stabilizable"]
    assert report["a1"]["holds"]


def test_invalid_config_exits_2(runner, preset_raw, write_config):
    preset_raw["comm"]["gamma"] = 1.2
    path = write_config(preset_raw)
    result = runner.invoke(cli, ["analyze", "--config", str(path)])
    assert result.exit_code == 2
    assert "comm.gamma" in result.output


def test_simulate_writes_run(runner, tmp_path):
    result = runner.invoke(cli, ["simulate", "--horizon", "60", "--out", str(tmp_path), "--oracle", "--baseline"])
    assert result.exit_code == 0, result.output
    for name in ("resolved_config.json", "trace.csv", "metrics.json", "frames.bin", "frames.json"):
        assert (tmp_path / name).exists(), name
    assert (tmp_path / "plots" / "delta_norm.dat").exists()
    payload = json.loads((tmp_path / "metrics.json").read_text(encoding="utf-8"))
    assert payload["status"] == "completed"
    assert payload["horizon"] == 60
    assert payload["oracle"]["agree"]
    assert payload["total_bits_per_step"] == 48
    assert "state_feedback_baseline" in payload


def test_simulate_respects_format_and_seed_env(runner, tmp_path):
    result = runner.invoke(
        cli,
        ["simulate", "--horizon", "5", "--out", str(tmp_path), "--format", "json"],
        env={"QUANTCOOP_SEED": "3"},
    )
    assert result.exit_code == 0, result.output
    assert not (tmp_path / "trace.csv").exists()
    resolved = json.loads((tmp_path / "resolved_config.json").read_text(encoding="utf-8"))
    assert resolved["simulation"]["seed"] == 3
    assert resolved["simulation"]["horizon"] == 5


def test_synthesize_sized_levels(runner, preset_raw, write_config, tmp_path):
    preset_raw["network"] = {"n_agents": 3, "edges": COMPLETE3}
    preset_raw["law"]["K"] = [[0.4, 0.0]]
    preset_raw["comm"].update(gamma="auto", L="auto", L_u="auto", G=[[1.2], [1.2]])
    preset_raw["sizing"] = {"c_x": 1.0, "c_xhat": 1.0, "c_uhat": 1.0}
    out = tmp_path / "synth"
    result = runner.invoke(cli, ["synthesize", "--config", str(write_config(preset_raw)), "--out", str(out)])
    assert result.exit_code == 0, result.output
    cfg = load_config(out / "resolved_config.json")
    assert isinstance(cfg.comm.levels_y, int) and isinstance(cfg.comm.levels_u, int)
    assert 0.0 < cfg.comm.gamma < 1.0
    synthesis = json.loads((out / "synthesis.json").read_text(encoding="utf-8"))
    assert synthesis["sizing"]["case"] == "i"


def test_synthesize_bound_needs_sizing(runner, tmp_path):
    result = runner.invoke(cli, ["synthesize", "--level-search", "bound", "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert "sizing" in result.output


def test_witness_on_undetectable_plant(runner, preset_raw, write_config, tmp_path):
    preset_raw["plant"] = {"A": [[1.0, 0.0], [0.0, 0.5]], "B": [[1.0], [1.0]], "C": [[0.0, 1.0]]}
    path = write_config(preset_raw)
    result = runner.invoke(
        cli, ["witness", "--config", str(path), "--kind", "undetectable", "--horizon", "30", "--out", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "witness.json").read_text(encoding="utf-8"))
    assert report["holds"]
    assert (tmp_path / "plots" / "witness_observed.dat").exists()


def test_witness_inapplicable_exits_3(runner, tmp_path):
    result = runner.invoke(cli, ["witness", "--kind", "undetectable", "--out", str(tmp_path)])
    assert result.exit_code == 3


def test_reproduce_short_horizon_fails_acceptance(runner, tmp_path):
    result = runner.invoke(cli, ["reproduce-paper", "--horizon", "60", "--out", str(tmp_path)])
    assert result.exit_code == 1, result.output
    assert "0/1 seeds passed" in result.output
    payload = json.loads((tmp_path / "metrics.json").read_text(encoding="utf-8"))
    assert payload["acceptance"]["checks"]["limit"] is False
    assert (tmp_path / "trace.csv").exists()


def test_reproduce_passes_at_full_horizon(runner, tmp_path):
    result = runner.invoke(cli, ["reproduce-paper", "--seed", "7", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "1/1 seeds passed" in result.output
    payload = json.loads((tmp_path / "metrics.json").read_text(encoding="utf-8"))
    assert all(payload["acceptance"]["checks"].values())


def test_reproduce_trace_is_byte_identical_across_runs(runner, tmp_path):
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        result = runner.invoke(cli, ["reproduce-paper", "--seed", "7", "--out", str(out)])
        assert result.exit_code == 0, result.output
        outputs.append((out / "trace.csv").read_bytes())
    assert outputs[0] == outputs[1]
    assert len(outputs[0]) > 0
