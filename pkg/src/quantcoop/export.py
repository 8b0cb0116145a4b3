"""
Files written for a run: trace CSV, JSON summaries, plot data and the frame log.

CSV columns, in order: ``t``; ``x<i>_<k>`` for agent i and state component k;
``E<j>_<k>`` for the observer error of agent j; ``delta_norm``;
``Ej_norm_<j>`` per agent; ``sat_count``. Indices are 1-based.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from quantcoop.codec import SymbolFrame, decode_frame, encode_frame, frame_format
from quantcoop.models import ProtocolViolation
from quantcoop.simulator import SimTrace

_WIRE_LEVEL_MAX = 32767


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def to_jsonable(value: Any) -> Any:
    """Convert numpy values, complex numbers, paths and dataclasses to JSON types.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``.

    Examples
    --------
    >>> to_jsonable({"a": np.arange(2), "b": 1 + 2j, "c": float("inf")})
    {'a': [0, 1], 'b': [1.0, 2.0], 'c': 'inf'}
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(float(value.real)), to_jsonable(float(value.imag))]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, Path):
        return str(value)
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return to_jsonable({f.name: getattr(value, f.name) for f in dataclasses.fields(value)})
    return value


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(payload), indent=2) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Trace CSV
# ---------------------------------------------------------------------------


def trace_columns(n_agents: int, n: int) -> list[str]:
    """Header row of the trace CSV.

    Examples
    --------
    >>> trace_columns(1, 2)
    ['t', 'x1_1', 'x1_2', 'E1_1', 'E1_2', 'delta_norm', 'Ej_norm_1', 'sat_count']
    """
    states = [f"x{i}_{k}" for i in range(1, n_agents + 1) for k in range(1, n + 1)]
    errors = [f"E{j}_{k}" for j in range(1, n_agents + 1) for k in range(1, n + 1)]
    norms = [f"Ej_norm_{j}" for j in range(1, n_agents + 1)]
    return ["t", *states, *errors, "delta_norm", *norms, "sat_count"]


def _cell(value: float) -> str:
    return repr(float(value))


def write_trace_csv(trace: SimTrace, path: Path) -> Path:
    """One row per stored step; floats are written in shortest round-trip form."""
    _, n_agents, n = trace.x.shape
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace_columns(n_agents, n))
        for row, t in enumerate(trace.steps):
            t = int(t)
            writer.writerow(
                [
                    t,
                    *(_cell(v) for v in trace.x[row].reshape(-1)),
                    *(_cell(v) for v in trace.e[row].reshape(-1)),
                    _cell(trace.delta_norms[t]),
                    *(_cell(v) for v in trace.error_norms[t]),
                    int(trace.sat_counts[t]),
                ]
            )
    return path


# ---------------------------------------------------------------------------
# Plot data
# ---------------------------------------------------------------------------


def _write_series(path: Path, steps: np.ndarray, values: np.ndarray) -> Path:
    np.savetxt(path, np.column_stack([steps, values]), fmt=["%d", "%.17g"], delimiter=" ")
    return path


def gnuplot_script(series: Sequence[tuple[str, str]], title: str, ylabel: str, output: str) -> str:
    """A log-scale gnuplot script drawing each ``(data file, legend)`` pair."""
    plots = ", \\\n     ".join(f"'{name}' using 1:2 with lines title '{legend}'" for name, legend in series)
    return (
        "set terminal pngcairo size 900,600\n"
        f"set output '{output}'\n"
        f"set title '{title}'\n"
        "set xlabel 't'\n"
        f"set ylabel '{ylabel}'\n"
        "set logscale y\n"
        "set grid\n"
        f"plot {plots}\n"
    )


def write_plot_data(trace: SimTrace, out_dir: Path) -> list[Path]:
    """``delta_norm.dat``, ``error_norm_<j>.dat`` per agent and ``plot.gp`` drawing both figures."""
    out_dir.mkdir(parents=True, exist_ok=True)
    steps = np.arange(trace.delta_norms.size)
    files = [_write_series(out_dir / "delta_norm.dat", steps, trace.delta_norms)]
    errors: list[tuple[str, str]] = []
    for j in range(trace.error_norms.shape[1]):
        name = f"error_norm_{j + 1}.dat"
        files.append(_write_series(out_dir / name, steps, trace.error_norms[:, j]))
        errors.append((name, f"||E_{j + 1}(t)||"))
    script = gnuplot_script([("delta_norm.dat", "||delta(t)||")], "Disagreement", "norm", "delta_norm.png")
    script += "\n" + gnuplot_script(errors, "Estimation error", "norm", "error_norm.png")
    gp = out_dir / "plot.gp"
    gp.write_text(script, encoding="utf-8")
    files.append(gp)
    return files


def write_witness_plot(steps: np.ndarray, observed: np.ndarray, envelope: np.ndarray, out_dir: Path) -> list[Path]:
    """Observed quantity against its predicted envelope."""
    out_dir.mkdir(parents=True, exist_ok=True)
    files = [
        _write_series(out_dir / "witness_observed.dat", steps, observed),
        _write_series(out_dir / "witness_envelope.dat", steps, envelope),
    ]
    gp = out_dir / "plot.gp"
    gp.write_text(
        gnuplot_script(
            [("witness_observed.dat", "observed"), ("witness_envelope.dat", "envelope")],
            "Witness trajectory",
            "magnitude",
            "witness.png",
        ),
        encoding="utf-8",
    )
    files.append(gp)
    return files


# ---------------------------------------------------------------------------
# Frame log
# ---------------------------------------------------------------------------


def frame_log_supported(levels_y: int, levels_u: int, precise: bool = False) -> bool:
    """Frames fit the 16-bit wire layout only for integer symbols within +-32767."""
    return not precise and levels_y <= _WIRE_LEVEL_MAX and levels_u <= _WIRE_LEVEL_MAX


def write_frame_log(
    frames: Iterable[SymbolFrame],
    out_dir: Path,
    p: int,
    m: int,
    levels_y: int,
    levels_u: int,
    channels: Sequence[tuple[int, int]],
) -> list[Path]:
    """Append every frame to ``frames.bin`` and describe the layout in ``frames.json``.

    The index records the frame size, the count, the 1-based channel list
    and the byte offset of each step's first frame.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    size = frame_format(p, m).size
    offsets: dict[int, int] = {}
    count = 0
    bin_path = out_dir / "frames.bin"
    with bin_path.open("wb") as fh:
        for frame in frames:
            offsets.setdefault(frame.t, count * size)
            fh.write(encode_frame(frame, levels_y, levels_u))
            count += 1
    index = {
        "frame_size": size,
        "count": count,
        "p": p,
        "m": m,
        "levels_y": levels_y,
        "levels_u": levels_u,
        "channels": [[j + 1, i + 1] for j, i in channels],
        "step_offsets": {str(t): off for t, off in offsets.items()},
    }
    return [bin_path, write_json(out_dir / "frames.json", index)]


def read_frame_log(directory: Path) -> list[SymbolFrame]:
    """Replay ``frames.bin`` using its ``frames.json`` index.

    Raises
    ------
    ProtocolViolation:
        If the log is truncated, the count disagrees with the index, or
        steps go backwards.
    """
    index = json.loads((directory / "frames.json").read_text(encoding="utf-8"))
    data = (directory / "frames.bin").read_bytes()
    size, count = index["frame_size"], index["count"]
    if len(data) != size * count:
        raise ProtocolViolation(f"frame log holds {len(data)} bytes, index declares {count} frames of {size}")
    frames: list[SymbolFrame] = []
    last_t = 0
    for pos in range(0, len(data), size):
        frame = decode_frame(data[pos : pos + size], index["p"], index["m"], index["levels_y"], index["levels_u"])
        if frame.t < last_t:
            raise ProtocolViolation(f"frame for step {frame.t} after step {last_t}")
        last_t = frame.t
        frames.append(frame)
    return frames
