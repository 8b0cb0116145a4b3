"""Shared fixtures: the worked-example plant, its four-agent graph and protocol."""

import copy
import json
from pathlib import Path

import numpy as np
import pytest

from quantcoop.analysis import LtiPlant
from quantcoop.codec import CommParams
from quantcoop.config import EXAMPLE_PRESET
from quantcoop.graph import build_network
from quantcoop.protocol import ControlLaw
from quantcoop.simulator import InitialConditions, SimConfig, sample_uniform_initials

FIG1_EDGES = [(1, 2), (2, 1), (1, 3), (2, 4)]


@pytest.fixture
def plant():
    return LtiPlant(a=[[1.0, 0.1], [0.0, 0.5]], b=[[1.0], [1.0]], c=[[1.0, 0.0]])


@pytest.fixture
def net():
    return build_network(4, FIG1_EDGES)


@pytest.fixture
def law():
    return ControlLaw.consensus([[0.2, 0.0]])


@pytest.fixture
def comm():
    return CommParams(gamma=0.95, alpha=1.0, alpha_u=1.0, levels_y=20, levels_u=20, observer_gain=[[0.5], [0.0]])


@pytest.fixture
def initials() -> InitialConditions:
    return sample_uniform_initials(np.random.default_rng(7), 4, 2, 1)


@pytest.fixture
def sim_config(plant, net, law, comm, initials):
    def make(horizon: int = 100, **kwargs) -> SimConfig:
        return SimConfig(plant=plant, net=net, law=law, comm=comm, initial=initials, horizon=horizon, **kwargs)

    return make


@pytest.fixture
def preset_raw() -> dict:
    return copy.deepcopy(json.loads(EXAMPLE_PRESET.read_text(encoding="utf-8")))


@pytest.fixture
def write_config(tmp_path):
    def write(doc: dict, name: str = "experiment.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return path

    return write
