"""Trace CSV, plot data, JSON conversion and the binary frame log."""

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from quantcoop.export import (
    frame_log_supported,
    read_frame_log,
    to_jsonable,
    trace_columns,
    write_frame_log,
    write_json,
    write_plot_data,
    write_trace_csv,
    write_witness_plot,
)
from quantcoop.models import ProtocolViolation
from quantcoop.simulator import simulate_primitive


@pytest.fixture
def trace(sim_config):
    return simulate_primitive(sim_config(horizon=20), record_frames=True)


def write_log(trace, out_dir: Path, frames=None) -> list[Path]:
    return write_frame_log(trace.frames if frames is None else frames, out_dir, 1, 1, 20, 20, trace.channels)


def test_trace_csv(trace, tmp_path):
    path = write_trace_csv(trace, tmp_path / "trace.csv")
    with path.open(encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    assert header == trace_columns(4, 2)
    assert len(header) == 23
    assert header[:3] == ["t", "x1_1", "x1_2"]
    assert header[-6:] == ["delta_norm", "Ej_norm_1", "Ej_norm_2", "Ej_norm_3", "Ej_norm_4", "sat_count"]
    assert len(rows) == 22
    last = rows[-1]
    assert last[0] == "20"
    assert float(last[1]) == trace.x[-1, 0, 0]
    assert float(last[header.index("delta_norm")]) == trace.delta_norms[20]
    assert float(last[header.index("E3_2")]) == trace.e[-1, 2, 1]


def test_trace_csv_follows_stride(sim_config, tmp_path):
    trace = simulate_primitive(sim_config(horizon=25, stride=10))
    path = write_trace_csv(trace, tmp_path / "trace.csv")
    steps = [row[0] for row in csv.reader(path.open(encoding="utf-8"))][1:]
    assert steps == ["0", "10", "20", "25"]


def test_plot_data(trace, tmp_path):
    files = write_plot_data(trace, tmp_path / "plots")
    names = sorted(p.name for p in files)
    assert names == ["delta_norm.dat", *(f"error_norm_{j}.dat" for j in range(1, 5)), "plot.gp"]
    series = np.loadtxt(tmp_path / "plots" / "delta_norm.dat")
    assert series.shape == (21, 2)
    assert np.array_equal(series[:, 1], trace.delta_norms)
    script = (tmp_path / "plots" / "plot.gp").read_text(encoding="utf-8")
    assert "set logscale y" in script
    assert "error_norm_4.dat" in script


def test_witness_plot(tmp_path):
    files = write_witness_plot(np.arange(3), np.array([1.0, 2.0, 4.0]), np.array([1.0, 1.5, 3.0]), tmp_path)
    assert [p.name for p in files] == ["witness_observed.dat", "witness_envelope.dat", "plot.gp"]
    assert np.loadtxt(files[1])[2, 1] == 3.0


def test_frame_log_replays(trace, tmp_path):
    write_log(trace, tmp_path)
    index = json.loads((tmp_path / "frames.json").read_text(encoding="utf-8"))
    assert index["frame_size"] == 16
    assert index["count"] == 80
    assert index["channels"] == [[j + 1, i + 1] for j, i in trace.channels]
    assert index["step_offsets"]["1"] == 0
    assert index["step_offsets"]["2"] == 4 * 16
    assert read_frame_log(tmp_path) == trace.frames


def test_truncated_frame_log(trace, tmp_path):
    write_log(trace, tmp_path)
    data = (tmp_path / "frames.bin").read_bytes()
    (tmp_path / "frames.bin").write_bytes(data[:-1])
    with pytest.raises(ProtocolViolation, match="holds"):
        read_frame_log(tmp_path)


def test_frame_log_rejects_backwards_steps(trace, tmp_path):
    write_log(trace, tmp_path, frames=list(reversed(trace.frames)))
    with pytest.raises(ProtocolViolation, match="after step"):
        read_frame_log(tmp_path)


def test_frame_log_supported():
    assert frame_log_supported(20, 20)
    assert frame_log_supported(32767, 1)
    assert not frame_log_supported(32768, 1)
    assert not frame_log_supported(20, 20, precise=True)


def test_to_jsonable():
    @dataclasses.dataclass
    class Sample:
        flag: np.bool_
        where: Path
        values: tuple

    out = to_jsonable(Sample(np.bool_(True), Path("runs/a"), (np.float64("nan"), -np.inf, np.int64(3))))
    assert out == {"flag": True, "where": "runs/a", "values": ["nan", "-inf", 3]}
    assert to_jsonable({1: 0.5 - 1j}) == {"1": [0.5, -1.0]}


def test_write_json_creates_parents(tmp_path):
    path = write_json(tmp_path / "deep" / "out.json", {"a": np.arange(3)})
    assert json.loads(path.read_text(encoding="utf-8")) == {"a": [0, 1, 2]}
