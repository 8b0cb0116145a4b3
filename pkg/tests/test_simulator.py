"""Primitive and coupled simulation, baselines and the oracle comparison."""

import dataclasses

import numpy as np
import pytest

from quantcoop.analysis import LtiPlant
from quantcoop.codec import CommParams, frame_roundtrip
from quantcoop.graph import build_network
from quantcoop.models import ConfigError, DimensionError
from quantcoop.numerics import spectral_radius
from quantcoop.protocol import ControlLaw
from quantcoop.simulator import (
    InitialConditions,
    SimConfig,
    compare_traces,
    sample_ball_initials,
    sample_uniform_initials,
    simulate_coupled,
    simulate_precise_state,
    simulate_primitive,
    stacked_inputs_check,
)

from conftest import FIG1_EDGES

GRAPHS = {
    2: [(1, 2)],
    3: [(1, 2), (2, 3), (3, 1)],
    4: FIG1_EDGES,
}


def random_config(seed: int) -> SimConfig:
    rng = np.random.default_rng(seed)
    n, m, p = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 3))
    n_agents = int(rng.integers(2, 5))
    a = rng.uniform(-1, 1, (n, n))
    a = a / max(1.0, spectral_radius(a) / 1.2)
    plant = LtiPlant(a=a, b=rng.uniform(-1, 1, (n, m)), c=rng.uniform(-1, 1, (p, n)))
    comm = CommParams(
        gamma=0.9, alpha=0.5, alpha_u=0.5, levels_y=20, levels_u=20, observer_gain=rng.uniform(-0.5, 0.5, (n, p))
    )
    initial = InitialConditions(
        x0=rng.uniform(-2, 2, (n_agents, n)),
        xhat0=rng.uniform(-1, 1, (n_agents, n)),
        uhat0=rng.uniform(-1, 1, (n_agents, m)),
    )
    return SimConfig(
        plant=plant,
        net=build_network(n_agents, GRAPHS[n_agents]),
        law=ControlLaw.consensus(rng.uniform(-0.3, 0.3, (m, n))),
        comm=comm,
        initial=initial,
        horizon=40,
    )


def test_worked_example_converges(sim_config):
    trace = simulate_primitive(sim_config(horizon=300))
    assert trace.status == "completed"
    assert not trace.saturations
    assert trace.last_step == 300
    assert trace.delta_norms[-1] < 1e-3 * max(1.0, trace.delta_norms[0])
    assert trace.error_norms[-1].max() < 1e-3
    assert trace.bits_per_channel == 12
    assert trace.total_bits_per_step == 48
    assert trace.x.shape == (301, 4, 2)


def test_primitive_and_coupled_agree_on_worked_example(sim_config):
    cfg = sim_config(horizon=100)
    primitive = simulate_primitive(cfg)
    coupled = simulate_coupled(cfg)
    report = compare_traces(primitive, coupled)
    assert report.agree, report.max_diff
    assert coupled.mode == "coupled"
    assert np.array_equal(primitive.sat_counts, coupled.sat_counts)


@pytest.mark.parametrize("seed", range(20))
def test_primitive_and_coupled_agree_on_random_systems(seed):
    cfg = random_config(seed)
    report = compare_traces(simulate_primitive(cfg), simulate_coupled(cfg))
    assert report.agree, (report.first_mismatch, report.max_diff)


def test_precise_mode(sim_config):
    cfg = sim_config(horizon=60, mode="precise")
    assert cfg.comm.precise
    trace = simulate_primitive(cfg)
    assert trace.bits_per_channel is None
    assert trace.w_observed == 0.0
    assert not trace.saturations
    assert compare_traces(trace, simulate_coupled(cfg)).agree


def test_stacked_inputs_match_recorded_controls(sim_config):
    cfg = sim_config(horizon=30)
    assert stacked_inputs_check(cfg, simulate_primitive(cfg)) < 1e-12


def test_state_feedback_baseline(sim_config):
    trace = simulate_precise_state(sim_config(horizon=150))
    assert trace.mode == "state-feedback"
    assert np.all(trace.e == 0.0)
    assert trace.delta_norms[-1] < 1e-10
    assert trace.bits_per_channel is None


def test_frames_are_recorded_in_order(sim_config, comm):
    trace = simulate_primitive(sim_config(horizon=10), record_frames=True)
    assert len(trace.frames) == 40
    assert [f.sender for f in trace.frames[:4]] == [1, 2, 3, 4]
    assert [f.t for f in trace.frames[::4]] == list(range(1, 11))
    frame = trace.frames[-1]
    assert frame_roundtrip(frame, comm.levels_y, comm.levels_u) == frame


def test_stride_keeps_full_norm_series(sim_config):
    trace = simulate_primitive(sim_config(horizon=95, stride=10))
    assert trace.steps.tolist() == [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95]
    assert trace.x.shape[0] == 11
    assert trace.delta_norms.size == 96


def test_scaling_underflow_stops_the_run(net, initials):
    plant = LtiPlant(a=0.5 * np.eye(2), b=[[1.0], [1.0]], c=[[1.0, 0.0]])
    comm = CommParams(gamma=0.01, alpha=1.0, alpha_u=1.0, levels_y=20, levels_u=20, observer_gain=np.zeros((2, 1)))
    cfg = SimConfig(plant, net, ControlLaw.consensus(np.zeros((1, 2))), comm, initials, 200)
    trace = simulate_primitive(cfg)
    assert trace.status == "scaling-underflow"
    assert trace.last_step < 200


def test_saturation_is_recorded(plant, net, law, comm):
    initial = InitialConditions(x0=np.full((4, 2), 4.0), xhat0=np.zeros((4, 2)), uhat0=np.zeros((4, 1)))
    trace = simulate_primitive(SimConfig(plant, net, law, comm.with_levels(1, 1), initial, 5))
    assert trace.saturations
    first = trace.saturations[0]
    assert first.t == 1 and first.kind == "state" and first.magnitude > 1.5
    assert trace.sat_counts[0] == 0
    assert trace.sat_counts.sum() == len(trace.saturations)


def test_formation_reaches_offsets(plant, net, comm):
    offsets = np.array([[float(i), 0.0] for i in range(4)])
    rng = np.random.default_rng(3)
    initial = InitialConditions(x0=offsets + rng.uniform(0, 1, (4, 2)), xhat0=np.zeros((4, 2)), uhat0=np.zeros((4, 1)))
    law = ControlLaw.formation([[0.2, 0.0]], offsets)
    trace = simulate_primitive(SimConfig(plant, net, law, comm, initial, 300))
    assert trace.status == "completed"
    assert np.array_equal(trace.offsets, offsets)
    assert trace.delta_norms[-1] < 1e-3


def test_coupled_rejects_extension_laws(plant, net, comm, initials):
    law = ControlLaw.formation([[0.2, 0.0]], np.zeros((4, 2)))
    with pytest.raises(ConfigError):
        simulate_coupled(SimConfig(plant, net, law, comm, initials, 10))


def test_tracking_records_leader(plant, net, comm):
    initial = sample_uniform_initials(np.random.default_rng(2), 4, 2, 1, with_leader=True)
    law = ControlLaw.tracking([[0.2, 0.0]], [[0.2, 0.0]], leader_weights=[1.0, 0.0, 0.0, 0.0])
    trace = simulate_primitive(SimConfig(plant, net, law, comm, initial, 20), record_frames=True)
    assert trace.variant == "tracking"
    assert trace.leader_x.shape == (21, 2)
    assert np.allclose(trace.leader_x[1], plant.a @ initial.leader_x0)
    assert np.allclose(trace.reference, trace.leader_x)
    assert any(f.sender == 0 for f in trace.frames)


def test_mixed_law_runs(plant, net, comm, initials):
    law = ControlLaw.mixed([[-0.1, 0.0]], [[0.2, 0.0]])
    trace = simulate_primitive(SimConfig(plant, net, law, comm, initials, 20))
    assert trace.variant == "mixed"
    assert trace.status == "completed"


def test_compare_traces_reports_first_mismatch(sim_config):
    cfg = sim_config(horizon=20)
    trace = simulate_primitive(cfg)
    other = dataclasses.replace(trace, delta=trace.delta.copy())
    other.delta[7, 0, 0] += 1.0
    report = compare_traces(trace, other)
    assert not report.agree
    assert report.first_mismatch == 7
    assert report.max_diff["delta"] == pytest.approx(1.0)
    shorter = simulate_primitive(sim_config(horizon=10))
    assert not compare_traces(trace, shorter).agree


@pytest.mark.parametrize(
    "kwargs, error",
    [
        ({"horizon": 0}, ConfigError),
        ({"mode": "analog"}, ConfigError),
        ({"stride": 0}, ConfigError),
    ],
)
def test_sim_config_rejects_bad_settings(sim_config, kwargs, error):
    with pytest.raises(error):
        sim_config(**kwargs)


def test_sim_config_shape_checks(plant, net, law, comm, initials):
    bad = dataclasses.replace(initials, xhat0=np.zeros((3, 2)))
    with pytest.raises(DimensionError):
        SimConfig(plant, net, law, comm, bad, 10)
    with pytest.raises(DimensionError):
        SimConfig(plant, net, law, dataclasses.replace(comm, observer_gain=np.zeros((3, 1))), initials, 10)
    tracking = ControlLaw.tracking([[0.2, 0.0]], [[0.2, 0.0]], leader_weights=[1.0, 0.0, 0.0, 0.0])
    with pytest.raises(ConfigError, match="leader"):
        SimConfig(plant, net, tracking, comm, initials, 10)


def test_initial_samplers():
    rng = np.random.default_rng(0)
    uniform = sample_uniform_initials(rng, 3, 2, 1, low=-1.0, high=1.0, with_leader=True)
    assert uniform.x0.shape == (3, 2) and uniform.leader_x0.shape == (2,)
    assert not uniform.xhat0.any() and not uniform.uhat0.any()
    ball = sample_ball_initials(rng, 3, 2, 1, 2.0, 0.5, 0.25)
    assert np.max(np.abs(ball.x0)) < 2.0
    assert np.max(np.abs(ball.xhat0)) < 0.5
    assert np.max(np.abs(ball.uhat0)) < 0.25
