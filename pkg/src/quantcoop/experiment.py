"""
Experiment descriptions: schema validation, parsing and resolution of "auto" values.

A description is a JSON document tagged ``"schema": "quantcoop/1"`` with the
sections plant, network, law, comm, sizing, initial, simulation and output.
Validation collects every problem as a ``path: message`` line before any
numeric code runs; resolution then replaces each ``"auto"`` value by a gain
search, the level-count synthesis or the empirical level search, and the
resolved document reloads to the same run.
"""

from __future__ import annotations

import dataclasses
import json
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from quantcoop.analysis import LtiPlant
from quantcoop.codec import CommParams
from quantcoop.config import (
    CONFIG_SCHEMA,
    DEFAULT_DECAY_WINDOW,
    DEFAULT_HORIZON,
    DEFAULT_OUT_DIR,
    DEFAULT_SEARCH_BUDGET,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    PRESETS_DIR,
)
from quantcoop.graph import Network, build_network, spectrum
from quantcoop.models import ConfigError, InfeasibleError, ValidationResult
from quantcoop.protocol import VARIANTS, ControlLaw
from quantcoop.simulator import (
    MODES,
    InitialConditions,
    SimConfig,
    sample_ball_initials,
    sample_uniform_initials,
)
from quantcoop.synthesis import (
    GainSearchResult,
    LevelSearchResult,
    SizingInputs,
    SizingResult,
    empirical_level_search,
    search_gain_g,
    search_gain_k,
    synthesize_protocol,
)

AUTO = "auto"
FORMATS: tuple[str, ...] = ("csv", "json")
SAMPLERS: tuple[str, ...] = ("uniform", "ball", "explicit")
LEVEL_SEARCHES: tuple[str, ...] = ("bound", "empirical")

_SECTION_KEYS: dict[str, set[str]] = {
    "plant": {"A", "B", "C"},
    "network": {"n_agents", "edges"},
    "law": {"variant", "K", "K1", "K2", "offsets", "leader_weights", "L_K"},
    "comm": {"gamma", "alpha", "alpha_u", "L", "L_u", "G", "L_G", "level_search"},
    "sizing": {"c_x", "c_xhat", "c_uhat", "epsilon", "epsilon_bar1"},
    "initial": {"sampler", "low", "high", "x0", "xhat0", "uhat0", "leader_x0", "leader_xhat0"},
    "simulation": {"horizon", "mode", "stride", "seed", "trials", "window"},
    "output": {"dir", "formats"},
}
_REQUIRED_SECTIONS = ("plant", "network", "law", "comm")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


class _Checker:
    """Accumulates diagnostics while walking one document."""

    def __init__(self) -> None:
        self.errors: list[str] = []
        self.warnings: list[str] = []

    def error(self, path: str, message: str) -> None:
        self.errors.append(f"{path}: {message}")

    def section(self, raw: dict, name: str) -> dict | None:
        value = raw.get(name)
        if value is None:
            if name in _REQUIRED_SECTIONS:
                self.error(name, "missing section")
            return None
        if not isinstance(value, dict):
            self.error(name, f"expected an object, got {type(value).__name__}")
            return None
        for key in value:
            if key not in _SECTION_KEYS[name]:
                self.error(f"{name}.{key}", "unknown key")
        return value

    def number(
        self,
        path: str,
        value: Any,
        *,
        low: float | None = None,
        high: float | None = None,
        open_low: bool = True,
        open_high: bool = False,
    ) -> float | None:
        if not _is_number(value):
            self.error(path, f"expected a finite number, got {value!r}")
            return None
        bad_low = low is not None and (value <= low if open_low else value < low)
        bad_high = high is not None and (value >= high if open_high else value > high)
        if bad_low or bad_high:
            lb = "(" if open_low else "["
            rb = ")" if open_high else "]"
            lo = "-inf" if low is None else f"{low:g}"
            hi = "inf" if high is None else f"{high:g}"
            self.error(path, f"{value!r} outside {lb}{lo}, {hi}{rb}")
            return None
        return float(value)

    def integer(self, path: str, value: Any, minimum: int = 1) -> int | None:
        if not _is_int(value):
            self.error(path, f"expected an integer, got {value!r}")
            return None
        if value < minimum:
            self.error(path, f"must be at least {minimum}, got {value}")
            return None
        return value

    def matrix(self, path: str, value: Any, orient: str = "column") -> np.ndarray | None:
        """Nested list to a float array; a flat list becomes a column (or a row)."""
        if not isinstance(value, list) or not value:
            self.error(path, "expected a non-empty array")
            return None
        if all(_is_number(v) for v in value):
            arr = np.array(value, dtype=float)
            return arr.reshape(-1, 1) if orient == "column" else arr.reshape(1, -1)
        if not all(isinstance(row, list) for row in value):
            self.error(path, "mixes numbers and rows")
            return None
        width = len(value[0])
        if width == 0:
            self.error(f"{path}[0]", "empty row")
            return None
        ok = True
        for i, row in enumerate(value):
            if len(row) != width:
                self.error(f"{path}[{i}]", f"row length {len(row)}, expected {width}")
                ok = False
                continue
            for k, entry in enumerate(row):
                if not _is_number(entry):
                    self.error(f"{path}[{i}][{k}]", f"not a finite number ({entry!r})")
                    ok = False
        return np.array(value, dtype=float) if ok else None

    def shaped(self, path: str, value: Any, shape: tuple[int, int], orient: str = "column") -> np.ndarray | None:
        arr = self.matrix(path, value, orient)
        if arr is None:
            return None
        if arr.shape != shape:
            self.error(path, f"shape {arr.shape[0]}x{arr.shape[1]}, expected {shape[0]}x{shape[1]}")
            return None
        return arr

    def vector(self, path: str, value: Any, length: int) -> np.ndarray | None:
        if not isinstance(value, list) or not all(_is_number(v) for v in value):
            self.error(path, "expected a list of finite numbers")
            return None
        if len(value) != length:
            self.error(path, f"length {len(value)}, expected {length}")
            return None
        return np.array(value, dtype=float)


def _check_plant(chk: _Checker, plant: dict) -> tuple[int, int, int] | None:
    dims: dict[str, np.ndarray] = {}
    for key, orient in (("A", "column"), ("B", "column"), ("C", "row")):
        if key not in plant:
            chk.error(f"plant.{key}", "missing")
            continue
        arr = chk.matrix(f"plant.{key}", plant[key], orient)
        if arr is not None:
            dims[key] = arr
    if len(dims) != 3:
        return None
    a, b, c = dims["A"], dims["B"], dims["C"]
    n = a.shape[0]
    ok = True
    if a.shape != (n, n):
        chk.error("plant.A", f"shape {a.shape[0]}x{a.shape[1]}, expected a square matrix")
        ok = False
    if b.shape[0] != n:
        chk.error("plant.B", f"{b.shape[0]} rows, expected {n}")
        ok = False
    if c.shape[1] != n:
        chk.error("plant.C", f"{c.shape[1]} columns, expected {n}")
        ok = False
    return (n, b.shape[1], c.shape[0]) if ok else None


def _check_network(chk: _Checker, network: dict) -> int | None:
    size = chk.integer("network.n_agents", network.get("n_agents"))
    edges = network.get("edges", [])
    if not isinstance(edges, list):
        chk.error("network.edges", "expected a list of [from, to] or [from, to, weight]")
        return size
    seen: set[tuple[int, int]] = set()
    for idx, edge in enumerate(edges):
        path = f"network.edges[{idx}]"
        if not isinstance(edge, list) or len(edge) not in (2, 3):
            chk.error(path, "expected [from, to] or [from, to, weight]")
            continue
        j, i = edge[0], edge[1]
        if not (_is_int(j) and _is_int(i)):
            chk.error(path, "node ids must be integers")
            continue
        if size is not None and not (1 <= j <= size and 1 <= i <= size):
            chk.error(path, f"node out of range 1..{size}")
        if j == i:
            chk.error(path, "self loops are not allowed")
        if (j, i) in seen:
            chk.error(path, f"duplicate edge {j}->{i}")
        seen.add((j, i))
        if len(edge) == 3:
            chk.number(f"{path}[2]", edge[2], low=0.0)
    return size


def _check_law(chk: _Checker, law: dict, dims: tuple[int, int, int] | None, size: int | None) -> str | None:
    variant = law.get("variant", "consensus")
    if variant not in VARIANTS:
        chk.error("law.variant", f"expected one of {', '.join(VARIANTS)}, got {variant!r}")
        return None
    gain_keys = ("K",) if variant in ("consensus", "formation") else ("K1", "K2")
    for key in gain_keys:
        if key not in law:
            chk.error(f"law.{key}", f"required by the {variant} law")
            continue
        value = law[key]
        if value == AUTO:
            if key != "K":
                chk.error(f"law.{key}", "'auto' is only supported for K of the consensus and formation laws")
            continue
        if dims is not None:
            n, m, _ = dims
            chk.shaped(f"law.{key}", value, (m, n), orient="row")
    if "L_K" in law:
        chk.number("law.L_K", law["L_K"], low=0.0)
    if variant == "formation":
        if "offsets" not in law:
            chk.error("law.offsets", "required by the formation law")
        elif dims is not None and size is not None:
            chk.shaped("law.offsets", law["offsets"], (size, dims[0]))
    if variant == "tracking":
        if "leader_weights" not in law:
            chk.error("law.leader_weights", "required by the tracking law")
        elif size is not None:
            weights = chk.vector("law.leader_weights", law["leader_weights"], size)
            if weights is not None and np.any(weights < 0):
                chk.error("law.leader_weights", "weights must be nonnegative")
    if variant != "consensus":
        chk.warnings.append(f"law.variant: the {variant} law is simulated without a convergence guarantee")
    return variant


def _check_comm(chk: _Checker, comm: dict, dims: tuple[int, int, int] | None) -> dict[str, bool]:
    autos = {}
    gamma = comm.get("gamma")
    autos["gamma"] = gamma == AUTO
    if gamma is None:
        chk.error("comm.gamma", "missing (a number in (0, 1) or 'auto')")
    elif not autos["gamma"]:
        chk.number("comm.gamma", gamma, low=0.0, high=1.0, open_high=True)
    for key in ("alpha", "alpha_u"):
        if key in comm:
            chk.number(f"comm.{key}", comm[key], low=0.0, high=1.0)
    for key in ("L", "L_u"):
        value = comm.get(key)
        autos[key] = value == AUTO
        if value is None:
            chk.error(f"comm.{key}", "missing (a positive integer or 'auto')")
        elif not autos[key]:
            chk.integer(f"comm.{key}", value)
    g = comm.get("G")
    autos["G"] = g == AUTO
    if g is None:
        chk.error("comm.G", "missing (an n x p matrix or 'auto')")
    elif not autos["G"] and dims is not None:
        n, _, p = dims
        chk.shaped("comm.G", g, (n, p))
    if "L_G" in comm:
        chk.number("comm.L_G", comm["L_G"], low=0.0)
    method = comm.get("level_search", "bound")
    if method not in LEVEL_SEARCHES:
        chk.error("comm.level_search", f"expected one of {', '.join(LEVEL_SEARCHES)}, got {method!r}")
    autos["empirical"] = method == "empirical"
    return autos


def _check_sizing(chk: _Checker, sizing: dict) -> None:
    for key in ("c_x", "c_xhat", "c_uhat"):
        if key not in sizing:
            chk.error(f"sizing.{key}", "missing")
        else:
            chk.number(f"sizing.{key}", sizing[key], low=0.0)
    for key in ("epsilon", "epsilon_bar1"):
        if key in sizing:
            chk.number(f"sizing.{key}", sizing[key], low=0.0)


def _check_initial(
    chk: _Checker, initial: dict, dims: tuple[int, int, int] | None, size: int | None, variant: str | None
) -> str | None:
    sampler = initial.get("sampler", "uniform")
    if sampler not in SAMPLERS:
        chk.error("initial.sampler", f"expected one of {', '.join(SAMPLERS)}, got {sampler!r}")
        return None
    if sampler == "uniform":
        low = chk.number("initial.low", initial.get("low", 0.0), low=None)
        high = chk.number("initial.high", initial.get("high", 5.0), low=None)
        if low is not None and high is not None and not low < high:
            chk.error("initial", f"low {low:g} must be below high {high:g}")
    if sampler == "explicit":
        if "x0" not in initial:
            chk.error("initial.x0", "required by the explicit sampler")
        if dims is not None and size is not None:
            n, m, _ = dims
            for key, width in (("x0", n), ("xhat0", n), ("uhat0", m)):
                if key in initial:
                    chk.shaped(f"initial.{key}", initial[key], (size, width))
            if variant == "tracking":
                if "leader_x0" not in initial:
                    chk.error("initial.leader_x0", "required by the tracking law")
                else:
                    chk.vector("initial.leader_x0", initial["leader_x0"], n)
                if "leader_xhat0" in initial:
                    chk.vector("initial.leader_xhat0", initial["leader_xhat0"], n)
    return sampler


def _check_simulation(chk: _Checker, sim: dict, variant: str | None) -> None:
    if "horizon" in sim:
        chk.integer("simulation.horizon", sim["horizon"])
    if "stride" in sim:
        chk.integer("simulation.stride", sim["stride"])
    if "seed" in sim:
        chk.integer("simulation.seed", sim["seed"], minimum=0)
    if "trials" in sim:
        chk.integer("simulation.trials", sim["trials"])
    mode = sim.get("mode", "quantized")
    if mode not in MODES:
        chk.error("simulation.mode", f"expected one of {', '.join(MODES)}, got {mode!r}")
    elif mode == "coupled-oracle" and variant not in (None, "consensus"):
        chk.error("simulation.mode", "the coupled oracle covers the consensus law only")
    if "window" in sim:
        window = sim["window"]
        if not (isinstance(window, list) and len(window) == 2 and all(_is_int(v) for v in window)):
            chk.error("simulation.window", "expected [start, stop] integers")
        elif not 0 <= window[0] < window[1]:
            chk.error("simulation.window", f"need 0 <= start < stop, got {window}")


def _check_output(chk: _Checker, output: dict) -> None:
    if "dir" in output and not isinstance(output["dir"], str):
        chk.error("output.dir", "expected a path string")
    if "formats" in output:
        formats = output["formats"]
        if not isinstance(formats, list) or not formats:
            chk.error("output.formats", "expected a non-empty list")
        else:
            for idx, fmt in enumerate(formats):
                if fmt not in FORMATS:
                    chk.error(f"output.formats[{idx}]", f"expected one of {', '.join(FORMATS)}, got {fmt!r}")


def validate_config(raw: Any) -> ValidationResult:
    """Check an experiment description without running any numeric code.

    Returns
    -------
    ValidationResult listing every ``path: message`` problem found.
    """
    chk = _Checker()
    if not isinstance(raw, dict):
        chk.error("$", f"expected a JSON object, got {type(raw).__name__}")
        return ValidationResult(success=False, errors=chk.errors)
    if raw.get("schema") != CONFIG_SCHEMA:
        chk.error("schema", f"expected {CONFIG_SCHEMA!r}, got {raw.get('schema')!r}")
    for key in raw:
        if key != "schema" and key not in _SECTION_KEYS:
            chk.error(key, "unknown section")

    plant = chk.section(raw, "plant")
    network = chk.section(raw, "network")
    law = chk.section(raw, "law")
    comm = chk.section(raw, "comm")
    sizing = chk.section(raw, "sizing")
    initial = chk.section(raw, "initial") or {}
    sim = chk.section(raw, "simulation") or {}
    output = chk.section(raw, "output") or {}

    dims = _check_plant(chk, plant) if plant is not None else None
    size = _check_network(chk, network) if network is not None else None
    variant = _check_law(chk, law, dims, size) if law is not None else None
    autos = _check_comm(chk, comm, dims) if comm is not None else {}
    if sizing is not None:
        _check_sizing(chk, sizing)
    sampler = _check_initial(chk, initial, dims, size, variant)
    _check_simulation(chk, sim, variant)
    _check_output(chk, output)

    needs_bound = autos.get("gamma") or (
        (autos.get("L") or autos.get("L_u")) and not autos.get("empirical")
    )
    if needs_bound and sizing is None:
        chk.error("sizing", "required when gamma, or L / L_u with level_search 'bound', is 'auto'")
    if sampler == "ball" and sizing is None:
        chk.error("initial.sampler", "the ball sampler draws inside the sizing radii; add a sizing section")
    return ValidationResult(success=not chk.errors, errors=chk.errors, warnings=chk.warnings)


# ---------------------------------------------------------------------------
# Parsed configuration
# ---------------------------------------------------------------------------


def _auto_or(value: Any, convert: Callable[[Any], Any]) -> Any:
    return AUTO if value == AUTO else convert(value)


def _listed(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


@dataclass(frozen=True)
class LawSettings:
    variant: str
    k: np.ndarray | str
    """Distributed gain for consensus/formation, decentralised K1 otherwise; may be ``"auto"``."""
    k2: np.ndarray | None = None
    offsets: np.ndarray | None = None
    leader_weights: np.ndarray | None = None
    gain_bound: float = math.inf


@dataclass(frozen=True)
class CommSettings:
    gamma: float | str
    alpha: float
    alpha_u: float
    levels_y: int | str
    levels_u: int | str
    observer_gain: np.ndarray | str
    gain_bound: float = math.inf
    level_search: str = "bound"

    @property
    def needs_levels(self) -> bool:
        return AUTO in (self.levels_y, self.levels_u)


@dataclass(frozen=True)
class InitialSettings:
    sampler: str = "uniform"
    low: float = 0.0
    high: float = 5.0
    x0: np.ndarray | None = None
    xhat0: np.ndarray | None = None
    uhat0: np.ndarray | None = None
    leader_x0: np.ndarray | None = None
    leader_xhat0: np.ndarray | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment description; gains and protocol values may still be ``"auto"``."""

    plant: LtiPlant
    net: Network
    law: LawSettings
    comm: CommSettings
    sizing: SizingInputs | None = None
    initial: InitialSettings = field(default_factory=InitialSettings)
    horizon: int = DEFAULT_HORIZON
    mode: str = "quantized"
    stride: int = 1
    seed: int = DEFAULT_SEED
    trials: int = DEFAULT_TRIALS
    window: tuple[int, int] = DEFAULT_DECAY_WINDOW
    out_dir: Path = DEFAULT_OUT_DIR
    formats: tuple[str, ...] = FORMATS
    warnings: tuple[str, ...] = ()
    source: Path | None = None

    @classmethod
    def from_dict(cls, raw: Any, source: Path | None = None) -> ExperimentConfig:
        """Validate and parse a description.

        Raises
        ------
        ConfigError:
            With every diagnostic attached, if validation fails.
        """
        result = validate_config(raw)
        if not result.success:
            where = f"{source}: " if source is not None else ""
            raise ConfigError(f"{where}{result.error_count} configuration error(s)", diagnostics=result.errors)

        plant_raw = raw["plant"]
        plant = LtiPlant(
            a=np.array(plant_raw["A"], dtype=float),
            b=np.array(plant_raw["B"], dtype=float).reshape(len(plant_raw["A"]), -1),
            c=np.atleast_2d(np.array(plant_raw["C"], dtype=float)),
        )
        net_raw = raw["network"]
        net = build_network(net_raw["n_agents"], net_raw.get("edges", []))

        law_raw = raw["law"]
        variant = law_raw.get("variant", "consensus")
        first = law_raw["K"] if variant in ("consensus", "formation") else law_raw["K1"]
        law = LawSettings(
            variant=variant,
            k=_auto_or(first, plant.gain),
            k2=plant.gain(law_raw["K2"], "K2") if "K2" in law_raw and variant in ("tracking", "mixed") else None,
            offsets=np.array(law_raw["offsets"], dtype=float).reshape(net.n_agents, plant.n)
            if variant == "formation"
            else None,
            leader_weights=np.array(law_raw["leader_weights"], dtype=float) if variant == "tracking" else None,
            gain_bound=float(law_raw.get("L_K", math.inf)),
        )

        comm_raw = raw["comm"]
        comm = CommSettings(
            gamma=_auto_or(comm_raw["gamma"], float),
            alpha=float(comm_raw.get("alpha", 1.0)),
            alpha_u=float(comm_raw.get("alpha_u", 1.0)),
            levels_y=_auto_or(comm_raw["L"], int),
            levels_u=_auto_or(comm_raw["L_u"], int),
            observer_gain=_auto_or(comm_raw["G"], plant.observer_gain),
            gain_bound=float(comm_raw.get("L_G", math.inf)),
            level_search=comm_raw.get("level_search", "bound"),
        )

        sizing = None
        if "sizing" in raw:
            s = raw["sizing"]
            sizing = SizingInputs(
                c_x=float(s["c_x"]),
                c_xhat=float(s["c_xhat"]),
                c_uhat=float(s["c_uhat"]),
                epsilon=s.get("epsilon"),
                epsilon_bar1=s.get("epsilon_bar1"),
            )

        init_raw = raw.get("initial", {})
        size, n, m = net.n_agents, plant.n, plant.m

        def block(key: str, width: int) -> np.ndarray | None:
            if key not in init_raw:
                return None
            return np.array(init_raw[key], dtype=float).reshape(size, width)

        def vec(key: str) -> np.ndarray | None:
            return np.array(init_raw[key], dtype=float) if key in init_raw else None

        initial = InitialSettings(
            sampler=init_raw.get("sampler", "uniform"),
            low=float(init_raw.get("low", 0.0)),
            high=float(init_raw.get("high", 5.0)),
            x0=block("x0", n),
            xhat0=block("xhat0", n),
            uhat0=block("uhat0", m),
            leader_x0=vec("leader_x0"),
            leader_xhat0=vec("leader_xhat0"),
        )

        sim = raw.get("simulation", {})
        output = raw.get("output", {})
        return cls(
            plant=plant,
            net=net,
            law=law,
            comm=comm,
            sizing=sizing,
            initial=initial,
            horizon=sim.get("horizon", DEFAULT_HORIZON),
            mode=sim.get("mode", "quantized"),
            stride=sim.get("stride", 1),
            seed=sim.get("seed", DEFAULT_SEED),
            trials=sim.get("trials", DEFAULT_TRIALS),
            window=tuple(sim.get("window", DEFAULT_DECAY_WINDOW)),
            out_dir=Path(output.get("dir", DEFAULT_OUT_DIR)),
            formats=tuple(output.get("formats", FORMATS)),
            warnings=tuple(result.warnings),
            source=source,
        )

    def with_overrides(
        self,
        *,
        seed: int | None = None,
        horizon: int | None = None,
        out_dir: Path | None = None,
        formats: tuple[str, ...] | None = None,
        mode: str | None = None,
    ) -> ExperimentConfig:
        """Copy with command-line overrides applied; ``None`` keeps the configured value."""
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed
        if horizon is not None:
            if horizon < 1:
                raise ConfigError(f"horizon must be positive, got {horizon}")
            changes["horizon"] = horizon
        if out_dir is not None:
            changes["out_dir"] = Path(out_dir)
        if formats is not None:
            changes["formats"] = tuple(formats)
        if mode is not None:
            if mode not in MODES:
                raise ConfigError(f"unknown simulation mode {mode!r}")
            changes["mode"] = mode
        return dataclasses.replace(self, **changes)

    # -- initial conditions --------------------------------------------------

    @property
    def tracking(self) -> bool:
        return self.law.variant == "tracking"

    def initial_sampler(self) -> Callable[[np.random.Generator], InitialConditions]:
        """Draw function for the configured sampler; the explicit sampler ignores the generator."""
        size, n, m = self.net.n_agents, self.plant.n, self.plant.m
        init = self.initial

        if init.sampler == "explicit":
            fixed = InitialConditions(
                x0=init.x0,
                xhat0=init.xhat0 if init.xhat0 is not None else np.zeros((size, n)),
                uhat0=init.uhat0 if init.uhat0 is not None else np.zeros((size, m)),
                leader_x0=init.leader_x0,
                leader_xhat0=init.leader_xhat0,
            )
            return lambda rng: fixed

        if init.sampler == "ball":
            sizing = self.sizing

            def draw_ball(rng: np.random.Generator) -> InitialConditions:
                ic = sample_ball_initials(rng, size, n, m, sizing.c_x, sizing.c_xhat, sizing.c_uhat)
                if self.tracking:
                    ic = dataclasses.replace(ic, leader_x0=rng.uniform(-sizing.c_x, sizing.c_x, size=n))
                return ic

            return draw_ball

        return lambda rng: sample_uniform_initials(rng, size, n, m, init.low, init.high, with_leader=self.tracking)

    def draw_initials(self, seed: int | None = None) -> InitialConditions:
        rng = np.random.default_rng(self.seed if seed is None else seed)
        return self.initial_sampler()(rng)

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        """The description in schema form; unresolved values stay ``"auto"``."""
        law: dict[str, Any] = {"variant": self.law.variant}
        if self.law.variant in ("consensus", "formation"):
            law["K"] = _listed(self.law.k)
        else:
            law["K1"] = _listed(self.law.k)
            law["K2"] = _listed(self.law.k2)
        if self.law.offsets is not None:
            law["offsets"] = self.law.offsets.tolist()
        if self.law.leader_weights is not None:
            law["leader_weights"] = self.law.leader_weights.tolist()
        if math.isfinite(self.law.gain_bound):
            law["L_K"] = self.law.gain_bound

        comm: dict[str, Any] = {
            "gamma": self.comm.gamma,
            "alpha": self.comm.alpha,
            "alpha_u": self.comm.alpha_u,
            "L": self.comm.levels_y,
            "L_u": self.comm.levels_u,
            "G": _listed(self.comm.observer_gain),
            "level_search": self.comm.level_search,
        }
        if math.isfinite(self.comm.gain_bound):
            comm["L_G"] = self.comm.gain_bound

        init = self.initial
        initial: dict[str, Any] = {"sampler": init.sampler}
        if init.sampler == "uniform":
            initial.update(low=init.low, high=init.high)
        for key in ("x0", "xhat0", "uhat0", "leader_x0", "leader_xhat0"):
            value = getattr(init, key)
            if value is not None:
                initial[key] = value.tolist()

        doc: dict[str, Any] = {
            "schema": CONFIG_SCHEMA,
            "plant": {"A": self.plant.a.tolist(), "B": self.plant.b.tolist(), "C": self.plant.c.tolist()},
            "network": {"n_agents": self.net.n_agents, "edges": [list(edge) for edge in self.net.edges]},
            "law": law,
            "comm": comm,
        }
        if self.sizing is not None:
            sizing = {"c_x": self.sizing.c_x, "c_xhat": self.sizing.c_xhat, "c_uhat": self.sizing.c_uhat}
            for key in ("epsilon", "epsilon_bar1"):
                if getattr(self.sizing, key) is not None:
                    sizing[key] = getattr(self.sizing, key)
            doc["sizing"] = sizing
        doc["initial"] = initial
        doc["simulation"] = {
            "horizon": self.horizon,
            "mode": self.mode,
            "stride": self.stride,
            "seed": self.seed,
            "trials": self.trials,
            "window": list(self.window),
        }
        doc["output"] = {"dir": str(self.out_dir), "formats": list(self.formats)}
        return doc


def load_config(path: Path | str) -> ExperimentConfig:
    """Read and parse a JSON description.

    Raises
    ------
    ConfigError:
        If the file is missing, is not JSON, or fails validation.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: not valid JSON", diagnostics=[f"line {exc.lineno} column {exc.colno}: {exc.msg}"]
        ) from exc
    return ExperimentConfig.from_dict(raw, source=path)


def load_preset(name: str = "worked_example") -> ExperimentConfig:
    """Load a description bundled under ``presets/``."""
    path = PRESETS_DIR / f"{name}.json"
    if not path.exists():
        available = sorted(p.stem for p in PRESETS_DIR.glob("*.json"))
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(available)}")
    return load_config(path)


# ---------------------------------------------------------------------------
# Resolution
# ---------------------------------------------------------------------------


@dataclass
class ResolvedExperiment:
    """A configuration with every ``"auto"`` value replaced, ready to simulate."""

    config: ExperimentConfig
    law: ControlLaw
    comm: CommParams
    sizing: SizingResult | None = None
    gain_searches: dict[str, GainSearchResult] = field(default_factory=dict)
    level_search: LevelSearchResult | None = None
    warnings: list[str] = field(default_factory=list)

    def sim_config(
        self,
        seed: int | None = None,
        initial: InitialConditions | None = None,
        horizon: int | None = None,
        mode: str | None = None,
    ) -> SimConfig:
        cfg = self.config
        sim_mode = mode or cfg.mode
        if sim_mode == "coupled-oracle":
            sim_mode = "quantized"
        return SimConfig(
            plant=cfg.plant,
            net=cfg.net,
            law=self.law,
            comm=self.comm,
            initial=initial if initial is not None else cfg.draw_initials(seed),
            horizon=horizon or cfg.horizon,
            mode=sim_mode,
            stride=cfg.stride,
        )

    def to_dict(self) -> dict[str, Any]:
        """Schema document with every resolved value written out."""
        doc = self.config.to_dict()
        law = doc["law"]
        if "K" in law:
            law["K"] = self.law.k.tolist()
        doc["comm"].update(
            gamma=self.comm.gamma,
            L=self.comm.levels_y,
            L_u=self.comm.levels_u,
            G=self.comm.observer_gain.tolist(),
        )
        return doc


def _searched(result: GainSearchResult, name: str) -> np.ndarray:
    if not result.success:
        raise InfeasibleError(f"no stabilizing {name} found: {result.message}")
    return result.gain


def resolve_experiment(cfg: ExperimentConfig, budget: int = DEFAULT_SEARCH_BUDGET) -> ResolvedExperiment:
    """Replace every ``"auto"`` value.

    Gains come from the seeded gain searches; gamma and bound-based level
    counts from ``synthesize_protocol``; empirical level counts from
    ``empirical_level_search`` over ``cfg.trials`` draws of the configured
    sampler.

    Raises
    ------
    InfeasibleError:
        If a search fails, sizing is infeasible or a level count overflows.
    """
    plant, net = cfg.plant, cfg.net
    warnings = list(cfg.warnings)
    searches: dict[str, GainSearchResult] = {}

    k = cfg.law.k
    if isinstance(k, str):
        searches["K"] = search_gain_k(plant, spectrum(net), budget=budget, seed=cfg.seed)
        k = _searched(searches["K"], "K")
    g = cfg.comm.observer_gain
    if isinstance(g, str):
        searches["G"] = search_gain_g(plant, budget=budget, seed=cfg.seed)
        g = _searched(searches["G"], "G")

    law = ControlLaw(
        variant=cfg.law.variant,
        k=k,
        k2=cfg.law.k2,
        offsets=cfg.law.offsets,
        leader_weights=cfg.law.leader_weights,
        gain_bound=cfg.law.gain_bound,
    )
    if not law.has_convergence_guarantee and (cfg.comm.gamma == AUTO or cfg.comm.needs_levels):
        warnings.append(f"sizing is computed for the consensus law with the {law.variant} law's distributed gain")

    gamma = cfg.comm.gamma
    levels_y, levels_u = cfg.comm.levels_y, cfg.comm.levels_u
    sizing = None
    bound_levels = cfg.comm.needs_levels and cfg.comm.level_search == "bound"
    if gamma == AUTO or bound_levels:
        inputs = dataclasses.replace(cfg.sizing, gamma=None if gamma == AUTO else gamma)
        sizing = synthesize_protocol(
            plant, net, law.distributed_gain, g, inputs, alpha=cfg.comm.alpha, alpha_u=cfg.comm.alpha_u
        )
        warnings.extend(sizing.warnings)
        gamma = sizing.gamma
        if bound_levels:
            if sizing.overflow:
                raise InfeasibleError("synthesized level counts overflow; no finite protocol can be emitted")
            if levels_y == AUTO:
                levels_y = int(sizing.levels_y)
            if levels_u == AUTO:
                levels_u = int(sizing.levels_u)

    level_search = None
    if cfg.comm.needs_levels and cfg.comm.level_search == "empirical":
        probe = CommParams(
            gamma=gamma,
            alpha=cfg.comm.alpha,
            alpha_u=cfg.comm.alpha_u,
            levels_y=1,
            levels_u=1,
            observer_gain=g,
            gain_bound=cfg.comm.gain_bound,
        )
        level_search = empirical_level_search(
            plant, net, law, probe, cfg.initial_sampler(), cfg.horizon, cfg.trials, seed=cfg.seed
        )
        warnings.extend(level_search.warnings)
        if levels_y == AUTO:
            levels_y = level_search.levels_y
        if levels_u == AUTO:
            levels_u = level_search.levels_u

    try:
        comm = CommParams(
            gamma=float(gamma),
            alpha=cfg.comm.alpha,
            alpha_u=cfg.comm.alpha_u,
            levels_y=int(levels_y),
            levels_u=int(levels_u),
            observer_gain=g,
            gain_bound=cfg.comm.gain_bound,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if np.linalg.norm(comm.observer_gain, 2) >= comm.gain_bound:
        raise ConfigError(f"comm.G: norm {np.linalg.norm(comm.observer_gain, 2):.6g} violates L_G = {comm.gain_bound}")
    return ResolvedExperiment(
        config=cfg,
        law=law,
        comm=comm,
        sizing=sizing,
        gain_searches=searches,
        level_search=level_search,
        warnings=warnings,
    )
