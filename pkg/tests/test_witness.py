"""Necessity witnesses: undetectable, unstabilizable and unstable stacked recursion."""

import dataclasses
import math

import numpy as np
import pytest

from quantcoop.analysis import LtiPlant
from quantcoop.codec import CommParams
from quantcoop.graph import build_network
from quantcoop.models import ConfigError, WitnessInapplicable
from quantcoop.protocol import ControlLaw
from quantcoop.witness import (
    schur_growth_witness,
    staircase_decomposition,
    undetectable_witness,
    unobservable_growth_vector,
    unstabilizable_witness,
    witness_constant,
)

GROWING = [[1.1, 0.1], [0.0, 0.5]]


def wide_comm(observer_gain) -> CommParams:
    return CommParams(
        gamma=0.95, alpha=1.0, alpha_u=1.0, levels_y=10**9, levels_u=10**9, observer_gain=observer_gain
    )


@pytest.fixture
def hidden_plant():
    return LtiPlant(a=np.diag([1.0, 0.5]), b=[[1.0], [1.0]], c=[[0.0, 1.0]])


@pytest.fixture
def uncontrollable_plant():
    return LtiPlant(a=np.diag([0.5, 2.0]), b=[[1.0], [0.0]], c=[[1.0, 1.0]])


def test_unobservable_growth_vector(hidden_plant):
    x0, lam = unobservable_growth_vector(hidden_plant)
    assert np.allclose(x0, [1.0, 0.0])
    assert lam == pytest.approx(1.0)


def test_unobservable_growth_vector_needs_a_hidden_unstable_mode(plant):
    with pytest.raises(WitnessInapplicable):
        unobservable_growth_vector(plant)
    decaying = LtiPlant(a=np.diag([0.5, 1.0]), b=[[1.0], [1.0]], c=[[0.0, 1.0]])
    with pytest.raises(WitnessInapplicable, match="detectable"):
        unobservable_growth_vector(decaying)


def test_undetectable_witness(hidden_plant, net, law, comm):
    report = undetectable_witness(hidden_plant, net, law, comm, horizon=50)
    assert report.holds
    assert report.details["symbols_all_zero"]
    assert report.details["estimates_all_zero"]
    assert np.allclose(report.observed, 1.0)
    assert report.initial_norms == {"x": 1.0, "xhat": 0.0, "uhat": 0.0}


def test_undetectable_witness_with_growing_mode(net, law, comm):
    plant = LtiPlant(a=np.diag([2.0, 0.5]), b=[[1.0], [1.0]], c=[[0.0, 1.0]])
    report = undetectable_witness(plant, net, law, comm, horizon=40)
    assert report.holds
    assert report.details["lambda"] == pytest.approx([2.0, 0.0])
    assert report.observed[-1] == pytest.approx(2.0**40)


def test_undetectable_witness_inapplicable(plant, net, law, comm):
    with pytest.raises(WitnessInapplicable):
        undetectable_witness(plant, net, law, comm)


def test_staircase_decomposition(uncontrollable_plant):
    stair = staircase_decomposition(uncontrollable_plant)
    assert stair.controllable_dim == 1
    assert np.allclose(stair.a_u4, [[2.0]])
    assert np.allclose(np.abs(stair.unstable[:, 0]), [0.0, 1.0])
    assert np.allclose(stair.basis.T @ stair.basis, np.eye(2))


def test_staircase_of_controllable_plant(plant):
    stair = staircase_decomposition(plant)
    assert stair.controllable_dim == 2
    assert stair.unstable.shape == (2, 0)


def test_unstabilizable_witness(uncontrollable_plant, law, comm):
    net = build_network(2, [(1, 2)])
    report = unstabilizable_witness(uncontrollable_plant, net, law, comm, horizon=50)
    assert report.holds
    assert report.details["max_relative_gap"] <= 1e-9
    assert np.allclose(report.details["a_u4"], [[2.0]])
    assert report.observed[-1] == pytest.approx(report.observed[0] * 2.0**50, rel=1e-9)


def test_unstabilizable_witness_inapplicable(plant, law, comm):
    with pytest.raises(WitnessInapplicable):
        unstabilizable_witness(plant, build_network(2, [(1, 2)]), law, comm)


def test_witness_constant_rules(plant, comm):
    local = 4 * 0.5 * math.sqrt(2) * 2 / 0.05 + 4 * 0.5 * 0.5 * math.sqrt(8) / 0.05
    rhs, a = witness_constant(plant, 4, comm, 1.1, 0.95, "local")
    assert rhs == pytest.approx(local)
    assert a == pytest.approx(2 * local)
    rhs, _ = witness_constant(plant, 4, comm, 1.1, 0.95, "global")
    assert rhs == pytest.approx(local * 0.05 / 0.15)
    bounded = dataclasses.replace(comm, gain_bound=2.0)
    rhs, _ = witness_constant(plant, 4, bounded, 1.1, 0.95, "local")
    assert rhs == pytest.approx(4 * 0.5 * math.sqrt(2) * 2 / 0.05 + 4 * 2.0 * 0.5 * math.sqrt(8) / 0.05)
    with pytest.raises(ConfigError):
        witness_constant(plant, 4, comm, 1.1, 0.95, "median")


def test_schur_witness_without_observer(net, law):
    plant = LtiPlant(a=GROWING, b=[[1.0], [1.0]], c=[[1.0, 0.0]])
    report = schur_growth_witness(plant, net, law, wide_comm(np.zeros((2, 1))), horizon=30)
    assert report.holds
    assert report.details["rho_block"] == pytest.approx(1.1)
    assert not report.warnings
    assert np.all(report.observed >= report.envelope)
    assert report.details["z1_initial"] == pytest.approx(report.details["a"])


def test_schur_witness_without_control(net):
    plant = LtiPlant(a=GROWING, b=[[1.0], [1.0]], c=[[1.0, 0.0]])
    law = ControlLaw.consensus(np.zeros((1, 2)))
    report = schur_growth_witness(plant, net, law, wide_comm([[0.5], [0.0]]), horizon=30, constant_rule="global")
    assert report.holds
    assert report.details["constant_rule"] == "global"
    assert report.to_dict()["kind"] == "schur-growth"


def test_schur_witness_inapplicable(plant, net, law, comm):
    with pytest.raises(WitnessInapplicable, match="achieves both goals"):
        schur_growth_witness(plant, net, law, comm)
    with pytest.raises(WitnessInapplicable, match="varrho"):
        schur_growth_witness(plant, net, law, comm, varrho=0.5)


def test_witnesses_need_consensus_law(hidden_plant, net, comm):
    law = ControlLaw.mixed([[0.0, 0.0]], [[0.2, 0.0]])
    with pytest.raises(ConfigError):
        undetectable_witness(hidden_plant, net, law, comm)
    with pytest.raises(ConfigError):
        schur_growth_witness(hidden_plant, net, law, comm)
