"""Certainty-equivalence control laws."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantcoop.graph import build_network
from quantcoop.models import ConfigError, DimensionError, ProtocolViolation
from quantcoop.protocol import ControlLaw, control_input, precise_control_input, stacked_consensus_inputs

from conftest import FIG1_EDGES

K = np.array([[0.2, 0.0]])


def estimates_for(net, i, xh):
    return {j: xh[j] for j in net.in_neighbors(i)}


def test_consensus_input(net, law):
    xh = np.array([[1.0, 0.0], [2.0, 1.0], [4.0, 3.0], [0.0, 0.0]])
    u = control_input(law, 2, xh[2], estimates_for(net, 2, xh), net.adjacency[2])
    assert u == pytest.approx(0.2 * (1.0 - 4.0))


def test_neighbour_set_must_match(net, law):
    xh = np.zeros((4, 2))
    with pytest.raises(ProtocolViolation, match="missing"):
        control_input(law, 2, xh[2], {}, net.adjacency[2])
    with pytest.raises(ProtocolViolation):
        control_input(law, 2, xh[2], {0: xh[0], 3: xh[3]}, net.adjacency[2])
    with pytest.raises(DimensionError):
        control_input(law, 2, xh[2], {0: np.zeros(3)}, net.adjacency[2])


def test_formation_is_zero_in_formation(net):
    offsets = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    law = ControlLaw.formation(K, offsets)
    xh = offsets + np.array([5.0, -1.0])
    for i in range(4):
        u = control_input(law, i, xh[i], estimates_for(net, i, xh), net.adjacency[i])
        assert np.allclose(u, 0.0)
    assert np.array_equal(law.edge_offset(0, 2), [2.0, 0.0])


def test_tracking_adds_leader_term(net):
    law = ControlLaw.tracking(K, [[0.5, 0.0]], leader_weights=[1.0, 0.0, 0.0, 0.0])
    xh = np.zeros((4, 2))
    leader = np.array([2.0, 0.0])
    u = control_input(law, 0, xh[0], estimates_for(net, 0, xh), net.adjacency[0], leader_estimate=leader)
    assert u == pytest.approx(1.0)
    with pytest.raises(ProtocolViolation, match="leader"):
        control_input(law, 0, xh[0], estimates_for(net, 0, xh), net.adjacency[0])
    u = control_input(law, 1, xh[1], estimates_for(net, 1, xh), net.adjacency[1])
    assert u == pytest.approx(0.0)


def test_mixed_needs_own_state(net):
    law = ControlLaw.mixed([[-0.1, 0.0]], K)
    xh = np.array([[1.0, 0.0], [3.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    u = control_input(law, 0, xh[0], estimates_for(net, 0, xh), net.adjacency[0], own_state=np.array([2.0, 0.0]))
    assert u == pytest.approx(-0.2 + 0.2 * 2.0)
    assert np.array_equal(law.distributed_gain, K)
    with pytest.raises(ProtocolViolation):
        control_input(law, 0, xh[0], estimates_for(net, 0, xh), net.adjacency[0])


@pytest.mark.parametrize(
    "kwargs",
    [
        {"variant": "flocking", "k": K},
        {"variant": "tracking", "k": K, "leader_weights": np.ones(4)},
        {"variant": "mixed", "k": K},
        {"variant": "formation", "k": K},
        {"variant": "tracking", "k": K, "k2": K},
        {"variant": "tracking", "k": K, "k2": K, "leader_weights": np.array([1.0, -1.0])},
        {"variant": "consensus", "k": K, "gain_bound": 0.1},
    ],
)
def test_invalid_laws(kwargs):
    with pytest.raises(ConfigError):
        ControlLaw(**kwargs)


def test_only_consensus_has_guarantees():
    assert ControlLaw.consensus(K).has_convergence_guarantee
    assert not ControlLaw.mixed(K, K).has_convergence_guarantee


def test_stacked_inputs_match_per_agent(net, law):
    xh = np.random.default_rng(0).normal(size=(4, 2))
    stacked = stacked_consensus_inputs(net.laplacian, K, xh)
    for i in range(4):
        u = control_input(law, i, xh[i], estimates_for(net, i, xh), net.adjacency[i])
        assert np.allclose(stacked[i], u)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-100, 100))
def test_consensus_is_translation_invariant(seed, shift):
    net = build_network(4, FIG1_EDGES)
    law = ControlLaw.consensus(K)
    xh = np.random.default_rng(seed).normal(size=(4, 2))
    moved = xh + shift
    for i in range(4):
        a = control_input(law, i, xh[i], estimates_for(net, i, xh), net.adjacency[i])
        b = control_input(law, i, moved[i], estimates_for(net, i, moved), net.adjacency[i])
        assert np.allclose(a, b, atol=1e-9 * max(1.0, abs(shift)))


def test_precise_input_uses_true_states(net):
    x = np.array([[1.0, 0.0], [3.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    assert precise_control_input(K, 3, x, net.adjacency) == pytest.approx(0.6)
