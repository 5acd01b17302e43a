import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load_golden
from gtsvrg.errors import ConfigError, NumericError, TopologyError
from gtsvrg.topology import (Graph, MixingMatrix, build_graph, contraction_check, load_matrix,
                             metropolis_weights, save_matrix, second_singular_value,
                             uniform_complete)


def _all_topologies():
    return [
        build_graph("ring", 4),
        build_graph("ring", 10),
        build_graph("path", 6),
        build_graph("complete", 5),
        build_graph("grid2d", 12, {"rows": 3, "cols": 4}),
        build_graph("erdos_renyi", 10, {"prob": 0.5}, seed=7),
        build_graph("ring", 1),
    ]


def test_ring_edges():
    assert build_graph("ring", 4).edges == {(0, 1), (1, 2), (2, 3), (0, 3)}


def test_complete_edges():
    assert build_graph("complete", 3).edges == {(0, 1), (0, 2), (1, 2)}


def test_erdos_renyi_matches_pinned_edges():
    gold = load_golden("erdos_renyi_n10_p05_s7.json")
    g = build_graph("erdos_renyi", 10, {"prob": 0.5}, seed=7)
    assert g.is_connected()
    assert sorted(list(e) for e in g.edges) == gold["edges"]


def test_grid_shape_must_match():
    with pytest.raises(ConfigError):
        build_graph("grid2d", 10, {"rows": 3, "cols": 4})


@pytest.mark.parametrize("prob", [0.0, -0.1, 1.5, None])
def test_erdos_renyi_bad_probability(prob):
    with pytest.raises(ConfigError):
        build_graph("erdos_renyi", 5, {"prob": prob}, seed=0)


def test_erdos_renyi_gives_up_when_never_connected():
    with pytest.raises(TopologyError):
        build_graph("erdos_renyi", 30, {"prob": 1e-6}, seed=0)


def test_unknown_kind_and_bad_n():
    with pytest.raises(ConfigError):
        build_graph("star", 4)
    with pytest.raises(ConfigError):
        build_graph("ring", 0)


def test_graph_rejects_self_loops_and_out_of_range():
    with pytest.raises(ConfigError):
        Graph(3, frozenset({(1, 1)}))
    with pytest.raises(ConfigError):
        Graph(3, frozenset({(0, 3)}))


def test_ring4_metropolis_weights_and_sigma():
    mix = metropolis_weights(build_graph("ring", 4))
    expected = np.array([[1, 1, 0, 1], [1, 1, 1, 0], [0, 1, 1, 1], [1, 0, 1, 1]]) / 3
    np.testing.assert_allclose(mix.W, expected, atol=1e-15)
    assert abs(mix.sigma - 1 / 3) <= 1e-12


def test_uniform_complete_has_zero_sigma():
    mix = uniform_complete(6)
    assert mix.sigma == pytest.approx(0.0, abs=1e-15)


def test_metropolis_rejects_disconnected():
    with pytest.raises(TopologyError):
        metropolis_weights(Graph(4, frozenset({(0, 1), (2, 3)})))


def test_second_singular_value_examples():
    assert second_singular_value(np.eye(3)) == pytest.approx(1.0)
    assert second_singular_value(np.full((5, 5), 0.2)) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(NumericError):
        second_singular_value(np.array([[np.nan, 1.0], [1.0, 0.0]]))


def test_sigma_matches_circulant_eigenvalues():
    # symmetric circulant with first row (a, b, 0, ..., 0, b): eigenvalues a + 2b cos(2 pi j / n)
    n, a, b = 7, 0.5, 0.25
    W = np.zeros((n, n))
    for i in range(n):
        W[i, i], W[i, (i + 1) % n], W[i, (i - 1) % n] = a, b, b
    lam = [a + 2 * b * np.cos(2 * np.pi * j / n) for j in range(1, n)]
    assert MixingMatrix.from_array(W).sigma == pytest.approx(max(abs(x) for x in lam), abs=1e-14)


def test_sigma_nonsymmetric_is_transpose_invariant():
    # a doubly-stochastic, non-symmetric matrix: convex mix of permutations
    P1 = np.roll(np.eye(4), 1, axis=1)
    W = 0.5 * np.eye(4) + 0.3 * P1 + 0.2 * P1 @ P1
    assert second_singular_value(W) == pytest.approx(second_singular_value(W.T), abs=1e-14)
    assert second_singular_value(W) < 1


@pytest.mark.parametrize("g", _all_topologies(), ids=lambda g: f"n{g.n}e{len(g.edges)}")
def test_built_matrices_satisfy_invariants(g):
    mix = metropolis_weights(g)
    assert np.all(mix.W >= 0)
    np.testing.assert_allclose(mix.W.sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(mix.W.sum(axis=1), 1.0, atol=1e-12)
    assert np.array_equal(mix.W, mix.W.T)
    assert mix.sigma < 1
    assert second_singular_value(mix.W.T) == pytest.approx(mix.sigma, abs=1e-14)


@pytest.mark.parametrize("g", _all_topologies(), ids=lambda g: f"n{g.n}e{len(g.edges)}")
def test_contraction_random_vectors(g):
    mix = metropolis_weights(g)
    rng = np.random.default_rng(g.n)
    for _ in range(1000):
        assert contraction_check(mix, rng.standard_normal((g.n, 2)))[2]


def test_contraction_examples():
    mix = metropolis_weights(build_graph("ring", 4))
    lhs, rhs, ok = contraction_check(mix, np.ones(4))
    assert lhs == pytest.approx(0.0, abs=1e-15) and rhs == pytest.approx(0.0, abs=1e-15) and ok
    e1 = np.array([1.0, 0.0, 0.0, 0.0])
    lhs, rhs, ok = contraction_check(mix, e1)
    assert ok and lhs <= np.linalg.norm(e1 - 0.25) / 3 + 1e-15


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_contraction_property(n, seed):
    mix = metropolis_weights(build_graph("ring", n))
    x = np.random.default_rng(seed).standard_normal((n, 3))
    assert contraction_check(mix, x)[2]


@pytest.mark.parametrize("W, where", [
    ([[0.6, 0.5], [0.4, 0.5]], "row 0"),
    ([[0.5, 0.5], [0.6, 0.4]], "column 0"),
    ([[1.2, -0.2], [-0.2, 1.2]], "row 0, column 1"),
])
def test_validation_names_the_offending_index(W, where):
    with pytest.raises(TopologyError, match=where):
        MixingMatrix.from_array(W)


def test_sigma_one_is_rejected():
    with pytest.raises(TopologyError):
        MixingMatrix.from_array(np.eye(3))
    with pytest.raises(TopologyError):  # periodic: swap permutation
        MixingMatrix.from_array([[0.0, 1.0], [1.0, 0.0]])


def test_single_node():
    mix = metropolis_weights(build_graph("ring", 1))
    assert mix.W.tolist() == [[1.0]] and mix.sigma == 0.0


def test_matrix_roundtrip(tmp_path):
    mix = metropolis_weights(build_graph("erdos_renyi", 10, {"prob": 0.5}, seed=7))
    save_matrix(mix, tmp_path / "w.txt")
    back = load_matrix(tmp_path / "w.txt")
    assert np.array_equal(back.W, mix.W) and back.sigma == mix.sigma


def test_load_matrix_errors(tmp_path):
    f = tmp_path / "w.txt"
    f.write_text("2\n0.5 0.5\n")
    with pytest.raises(ConfigError, match="expected 2 matrix rows"):
        load_matrix(f)
    f.write_text("2\n0.5 0.5\n0.5\n")
    with pytest.raises(ConfigError, match="row 1"):
        load_matrix(f)
    f.write_text("2\n0.5 0.6\n0.5 0.4\n")
    with pytest.raises(TopologyError, match="row 0"):
        load_matrix(f)
