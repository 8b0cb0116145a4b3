"""Gain searches, protocol sizing and the empirical level search."""

import dataclasses

import numpy as np
import pytest

from quantcoop.analysis import LtiPlant, check_a1
from quantcoop.graph import build_network, spectrum
from quantcoop.models import ConfigError, InfeasibleError
from quantcoop.numerics import spectral_radius
from quantcoop.protocol import ControlLaw
from quantcoop.simulator import SimConfig, sample_ball_initials, sample_uniform_initials, simulate_primitive
from quantcoop.synthesis import (
    SizingInputs,
    block_spectral_radius,
    empirical_level_search,
    feasible_epsilons,
    level_count,
    search_gain_g,
    search_gain_k,
    synthesize_protocol,
)

COMPLETE3 = [(i, j) for i in range(1, 4) for j in range(1, 4) if i != j]
K_COMPLETE = np.array([[0.4, 0.0]])
G_COMPLETE = np.array([[1.2], [1.2]])


@pytest.fixture
def inputs():
    return SizingInputs(c_x=1.0, c_xhat=1.0, c_uhat=1.0)


def uniform_sampler(rng):
    return sample_uniform_initials(rng, 4, 2, 1)


def test_level_count():
    assert level_count(20.0, 1.0) == 20
    assert level_count(19.4, 1.0) == 19
    assert level_count(0.1, 1.0) == 1
    assert level_count(3.0, 0.5) == 6
    assert level_count(float("inf"), 1.0) == "overflow"
    assert level_count(1e30, 1.0) == "overflow"


def test_search_gain_k_on_worked_example(plant, net):
    spec = spectrum(net)
    result = search_gain_k(plant, spec, budget=2000, seed=0)
    assert result.success
    assert result.radius < 1.0
    assert check_a1(plant, spec, result.gain).holds
    assert result.evaluations > 0


def test_search_gain_k_is_reproducible(plant, net):
    spec = spectrum(net)
    first = search_gain_k(plant, spec, budget=1000, seed=5)
    second = search_gain_k(plant, spec, budget=1000, seed=5)
    assert np.array_equal(first.gain, second.gain)


def test_search_gain_k_stable_plant(net):
    plant = LtiPlant(a=0.5 * np.eye(2), b=[[1.0], [1.0]], c=[[1.0, 0.0]])
    result = search_gain_k(plant, spectrum(net))
    assert result.success
    assert not result.gain.any()
    assert result.start == "zero"


def test_search_gain_k_without_spanning_structure(plant):
    result = search_gain_k(plant, spectrum(build_network(2, [])))
    assert not result.success
    assert "lambda_2 = 0" in result.message


def test_search_gain_k_rejects_bad_budget(plant, net):
    with pytest.raises(ConfigError):
        search_gain_k(plant, spectrum(net), budget=0)


def test_search_gain_g(plant):
    result = search_gain_g(plant, budget=2000, seed=0)
    assert result.success
    assert result.gain.shape == (2, 1)
    assert spectral_radius(plant.a - result.gain @ plant.c) < 1.0


def test_search_gain_g_undetectable():
    plant = LtiPlant(a=np.diag([1.0, 0.5]), b=[[1.0], [1.0]], c=[[0.0, 1.0]])
    result = search_gain_g(plant, budget=500)
    assert not result.success
    assert "not detectable" in result.message


def test_sizing_inputs_validation():
    with pytest.raises(ConfigError):
        SizingInputs(c_x=0.0, c_xhat=1.0, c_uhat=1.0)
    with pytest.raises(ConfigError):
        SizingInputs(c_x=1.0, c_xhat=float("nan"), c_uhat=1.0)
    with pytest.raises(ConfigError):
        SizingInputs(c_x=1.0, c_xhat=1.0, c_uhat=1.0, epsilon=-0.1)
    with pytest.raises(ConfigError):
        SizingInputs(c_x=1.0, c_xhat=1.0, c_uhat=1.0, gamma=1.0)


def test_feasible_epsilons():
    bounds = feasible_epsilons(0.5 * np.eye(2))
    assert [b.epsilon for b in bounds] == [1e-3, 1e-2, 1e-1]
    assert all(b.eta < 1.0 for b in bounds)
    assert feasible_epsilons(np.zeros((0, 0))) == []


def test_synthesize_unstable_case(plant, inputs):
    net = build_network(3, COMPLETE3)
    result = synthesize_protocol(plant, net, K_COMPLETE, G_COMPLETE, inputs)
    assert result.case == "i"
    assert not result.overflow
    assert isinstance(result.levels_y, int) and result.levels_y >= 1
    assert isinstance(result.levels_u, int) and result.levels_u >= 1
    assert max(result.eta, result.eta_bar1) < result.gamma < 1.0
    assert result.delta_bound is not None and result.delta_bound > 0
    assert result.l_threshold == pytest.approx(result.e_bound)
    comm = result.comm_params(G_COMPLETE)
    assert comm.levels_y == result.levels_y
    assert comm.gamma == result.gamma
    assert set(result.to_dict()) >= {"case", "gamma", "levels_y", "levels_u", "diagnostics"}


def test_synthesize_with_explicit_gamma(plant, inputs):
    net = build_network(3, COMPLETE3)
    auto = synthesize_protocol(plant, net, K_COMPLETE, G_COMPLETE, inputs)
    fixed = synthesize_protocol(
        plant, net, K_COMPLETE, G_COMPLETE, dataclasses.replace(inputs, gamma=0.99, epsilon=auto.epsilon)
    )
    assert fixed.gamma == 0.99
    assert fixed.epsilon == auto.epsilon
    with pytest.raises(InfeasibleError, match="must exceed"):
        synthesize_protocol(plant, net, K_COMPLETE, G_COMPLETE, dataclasses.replace(inputs, gamma=0.05))


def test_synthesize_stable_case(net, inputs):
    plant = LtiPlant(a=0.5 * np.eye(2), b=[[1.0], [1.0]], c=[[1.0, 0.0]])
    result = synthesize_protocol(plant, net, np.zeros((1, 2)), np.zeros((2, 1)), inputs)
    assert result.case == "ii"
    assert result.diagnostics["norm.f_delta"] == 0.0
    assert not result.overflow


def test_synthesize_rejects_non_stabilizing_gains(plant, net, inputs):
    with pytest.raises(InfeasibleError, match="simultaneous"):
        synthesize_protocol(plant, net, np.zeros((1, 2)), [[0.5], [0.0]], inputs)
    with pytest.raises(InfeasibleError, match="A - G C"):
        synthesize_protocol(plant, net, [[0.2, 0.0]], np.zeros((2, 1)), inputs)


@pytest.mark.parametrize("alpha, alpha_u", [(0.0, 1.0), (1.5, 1.0), (1.0, -1.0)])
def test_synthesize_rejects_bad_steps(plant, net, inputs, alpha, alpha_u):
    with pytest.raises(ConfigError):
        synthesize_protocol(plant, net, [[0.2, 0.0]], [[0.5], [0.0]], inputs, alpha=alpha, alpha_u=alpha_u)


def test_overflowed_sizing_emits_no_protocol(plant, inputs):
    net = build_network(3, COMPLETE3)
    result = dataclasses.replace(
        synthesize_protocol(plant, net, K_COMPLETE, G_COMPLETE, inputs), levels_u="overflow"
    )
    assert result.overflow
    with pytest.raises(InfeasibleError):
        result.comm_params(G_COMPLETE)


def assert_within_sized_envelopes(trace, result):
    decay = result.gamma ** np.arange(trace.delta_norms.size)
    e_stacked = np.linalg.norm(trace.e.reshape(trace.e.shape[0], -1), axis=1)
    assert np.all(e_stacked <= result.e_bound * decay * (1 + 1e-9))
    if result.delta_bound is not None:
        assert np.all(trace.delta_norms <= result.delta_bound * decay * (1 + 1e-9))


def test_sized_protocol_never_saturates_inside_the_radii(plant, inputs):
    net = build_network(3, COMPLETE3)
    result = synthesize_protocol(plant, net, K_COMPLETE, G_COMPLETE, inputs)
    comm = result.comm_params(G_COMPLETE)
    law = ControlLaw.consensus(K_COMPLETE)
    rng = np.random.default_rng(5)
    for _ in range(50):
        initial = sample_ball_initials(rng, 3, 2, 1, inputs.c_x, inputs.c_xhat, inputs.c_uhat)
        trace = simulate_primitive(SimConfig(plant, net, law, comm, initial, 80))
        assert not trace.saturations
        assert trace.delta_norms[-1] < trace.delta_norms[0]
        assert_within_sized_envelopes(trace, result)


def test_stable_case_protocol_stays_inside_envelopes(inputs):
    stable = LtiPlant(a=[[0.6, 0.2], [0.0, 0.5]], b=[[1.0], [1.0]], c=[[1.0, 0.0]])
    net = build_network(3, COMPLETE3)
    k, g = np.zeros((1, 2)), np.zeros((2, 1))
    result = synthesize_protocol(stable, net, k, g, inputs)
    assert result.case == "ii"
    assert spectral_radius(stable.a) < 1.0
    comm = result.comm_params(g)
    law = ControlLaw.consensus(k)
    rng = np.random.default_rng(11)
    for _ in range(50):
        initial = sample_ball_initials(rng, 3, 2, 1, inputs.c_x, inputs.c_xhat, inputs.c_uhat)
        trace = simulate_primitive(SimConfig(stable, net, law, comm, initial, 80))
        assert not trace.saturations
        assert_within_sized_envelopes(trace, result)


def test_block_spectral_radius(plant, net):
    assert block_spectral_radius(plant, net, [[0.2, 0.0]], [[0.5], [0.0]]) == pytest.approx(0.7, rel=1e-6)


def test_empirical_level_search(plant, net, law, comm):
    result = empirical_level_search(plant, net, law, comm, uniform_sampler, horizon=60, trials=3, seed=1, cap=64)
    assert 1 <= result.levels_y <= result.joint <= 64
    assert 1 <= result.levels_u <= result.joint
    assert result.simulations > 0
    assert any("heuristic" in w for w in result.warnings)
    rng = np.random.default_rng(1)
    params = comm.with_levels(result.levels_y, result.levels_u)
    for _ in range(3):
        cfg = SimConfig(plant, net, law, params, uniform_sampler(rng), 60)
        assert not simulate_primitive(cfg).saturations


def test_empirical_level_search_gives_up_at_cap(plant, net, law, comm):
    def far_sampler(rng):
        return sample_uniform_initials(rng, 4, 2, 1, low=3.0, high=5.0)

    with pytest.raises(InfeasibleError, match="saturation persists"):
        empirical_level_search(plant, net, law, comm, far_sampler, horizon=5, trials=2, cap=1)


def test_empirical_level_search_needs_trials(plant, net, law, comm):
    with pytest.raises(ConfigError):
        empirical_level_search(plant, net, law, comm, uniform_sampler, horizon=5, trials=0)
