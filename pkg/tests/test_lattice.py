import numpy as np
import pytest

from lattice_ar.errors import ComplexSpectrum, DegenerateSpectrum, InvalidGraph, IsolatedNode
from lattice_ar.lattice import (AdjacencyGraph, WeightsMatrix, build_binary_weights, grid_graph,
                                real_eigenvalues, rho_bounds, row_standardize)


def test_two_node_graph():
    w = build_binary_weights(AdjacencyGraph.from_pairs(2, [(0, 1)]))
    np.testing.assert_array_equal(w.values, [[0, 1], [1, 0]])


def test_empty_graph_gives_zero_matrix():
    w = build_binary_weights(AdjacencyGraph(3, frozenset()))
    assert not w.values.any()


def test_edges_are_normalized():
    g = AdjacencyGraph.from_pairs(3, [(1, 0), (0, 1), (2, 1)])
    assert g.edges == frozenset({(0, 1), (1, 2)})
    assert g.neighbors(1) == [0, 2]


@pytest.mark.parametrize("pairs", [[(0, 0)], [(0, 3)], [(-1, 1)]])
def test_bad_edges(pairs):
    with pytest.raises(InvalidGraph):
        AdjacencyGraph.from_pairs(3, pairs)


def test_grid_row_sums():
    w = build_binary_weights(grid_graph(5, 5))
    assert w.n == 25
    assert set(w.values.sum(axis=1)) == {2.0, 3.0, 4.0}
    assert (w.values == w.values.T).all()
    # corners have two neighbors, interior nodes four
    assert w.values[0].sum() == 2 and w.values[12].sum() == 4


def test_row_standardize_hand_example():
    w = WeightsMatrix(np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]], dtype=float))
    wp, mp = row_standardize(w)
    np.testing.assert_allclose(wp.values[0], [0, 0.5, 0.5])
    np.testing.assert_allclose(np.diag(mp), [0.5, 1, 1])
    assert wp.kind == "row-standardized"


def test_row_standardize_trivial():
    wp, mp = row_standardize(WeightsMatrix(np.array([[0.0, 1], [1, 0]])))
    np.testing.assert_array_equal(wp.values, [[0, 1], [1, 0]])
    np.testing.assert_array_equal(mp, np.eye(2))


def test_grid_weights_color_classes():
    wp, _ = row_standardize(build_binary_weights(grid_graph(5, 5)))
    vals = set(np.round(0.9 * wp.values[wp.values > 0], 12))
    assert vals == {0.45, 0.3, 0.225}


def test_isolated_node():
    with pytest.raises(IsolatedNode):
        row_standardize(build_binary_weights(AdjacencyGraph.from_pairs(3, [(0, 1)])))


def test_weights_reject_diagonal():
    with pytest.raises(InvalidGraph):
        WeightsMatrix(np.eye(2))


def test_rho_bounds_pair():
    b = rho_bounds(np.array([[0.0, 1], [1, 0]]))
    assert b.lower == pytest.approx(-1) and b.upper == pytest.approx(1)
    assert b.contains(0.5) and not b.contains(1.0)
    lo, hi = b.shrunk(1e-6)
    assert lo == pytest.approx(-1 + 1e-6) and hi == pytest.approx(1 - 1e-6)


def test_row_standardized_upper_bound_is_one():
    wp, _ = row_standardize(build_binary_weights(grid_graph(4, 6)))
    assert rho_bounds(wp).upper == pytest.approx(1.0, abs=1e-12)


def test_complex_spectrum():
    # directed 3-cycle has complex eigenvalues
    with pytest.raises(ComplexSpectrum):
        real_eigenvalues(np.array([[0.0, 1, 0], [0, 0, 1], [1, 0, 0]]))


def test_degenerate_spectrum():
    with pytest.raises(DegenerateSpectrum):
        rho_bounds(np.zeros((3, 3)))


def test_columbus_bounds():
    from lattice_ar.io import load_dataset

    b = rho_bounds(build_binary_weights(load_dataset("columbus").adjacency))
    assert abs(b.lower + 0.335) < 1e-3 and abs(b.upper - 0.167) < 1e-3
