"""Topology construction, Laplacian spectrum, pi and the block split."""

import numpy as np
import pytest

from quantcoop.graph import build_network, has_spanning_tree, laplacian_split, spectrum
from quantcoop.models import ConfigError, NetworkError

from conftest import FIG1_EDGES


def test_fig1_laplacian(net):
    expected = np.array([[1, -1, 0, 0], [-1, 1, 0, 0], [-1, 0, 1, 0], [0, -1, 0, 1]], dtype=float)
    assert np.array_equal(net.laplacian, expected)
    assert net.in_neighbors(2) == [0]
    assert net.out_neighbors(0) == [1, 2]
    assert net.channels == [(1, 0), (0, 1), (0, 2), (1, 3)]
    assert sorted(net.edges) == sorted((j, i, 1.0) for j, i in FIG1_EDGES)
    assert not net.is_undirected


def test_fig1_spectrum(net):
    spec = spectrum(net)
    assert np.allclose(spec.eigenvalues, [0, 1, 1, 2], atol=1e-9)
    assert np.allclose(spec.pi, [0.5, 0.5, 0.0, 0.0])
    assert spec.lambda2_nonzero
    assert not spec.ambiguous
    assert has_spanning_tree(net, spec)


def test_single_edge_pair():
    net = build_network(2, [(1, 2)])
    assert np.array_equal(net.laplacian, [[0, 0], [-1, 1]])
    spec = spectrum(net)
    assert np.allclose(spec.pi, [1.0, 0.0])
    assert np.allclose(spec.eigenvalues, [0, 1])
    assert has_spanning_tree(net)


def test_disconnected_pair_is_ambiguous():
    net = build_network(2, [])
    spec = spectrum(net)
    assert not spec.lambda2_nonzero
    assert spec.ambiguous
    assert spec.warnings
    assert np.allclose(spec.pi, [1.0, 0.0])
    assert not has_spanning_tree(net, spec)


def test_weighted_edges():
    net = build_network(3, [(1, 2, 2.5), (2, 3)])
    assert net.adjacency[1, 0] == 2.5
    assert net.laplacian[1, 1] == 2.5
    assert np.allclose(spectrum(net).pi, [1, 0, 0])


@pytest.mark.parametrize(
    "n, edges",
    [
        (0, []),
        (2, [(1, 1)]),
        (2, [(1, 3)]),
        (2, [(1, 2), (1, 2)]),
        (2, [(1, 2, 0.0)]),
        (2, [(1, 2, -1.0)]),
        (2, [(1,)]),
        (2, [(1.5, 2)]),
    ],
)
def test_invalid_networks(n, edges):
    with pytest.raises(NetworkError):
        build_network(n, edges)


def test_network_error_is_a_config_error():
    assert issubclass(NetworkError, ConfigError)


def test_split_block_diagonalizes(net):
    split = laplacian_split(net)
    transformed = split.phi @ net.laplacian @ split.phi_inv
    expected = np.zeros((4, 4), dtype=complex)
    expected[1:, 1:] = split.t22
    assert np.allclose(transformed, expected, atol=1e-10)
    assert np.allclose(split.phi[0], [0.5, 0.5, 0, 0])
    assert np.allclose(np.tril(split.t22, -1), 0)
    assert np.allclose(np.sort(np.diag(split.t22).real), [1, 1, 2])
    assert np.allclose(split.phi_inv[:, 0], np.ones(4))
    assert split.condition >= 1.0


def test_split_of_directed_ring():
    net = build_network(3, [(1, 2), (2, 3), (3, 1)])
    split = laplacian_split(net)
    assert np.allclose(split.phi @ split.phi_inv, np.eye(3))
    assert np.allclose(split.phi_bar @ net.laplacian, split.t22 @ split.phi_bar)


def test_split_requires_spanning_tree():
    with pytest.raises(NetworkError):
        laplacian_split(build_network(3, [(1, 2)]))


def test_split_of_single_agent():
    split = laplacian_split(build_network(1, []))
    assert split.t22.shape == (0, 0)
