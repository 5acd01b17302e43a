import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gtsvrg.errors import ConfigError, UsageError
from gtsvrg.objectives import (load_problem, make_quadratic, make_reglog, quadratic_from_components,
                               reglog_from_components, save_problem)


def _bisect(fn, lo, hi, iters=200):
    flo = fn(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _problems():
    return [
        make_quadratic(3, [4, 2, 5], 3, 1.0, 10.0, seed=1),
        make_quadratic(2, 3, 1, 0.5, 2.0, seed=2),
        make_reglog(3, [3, 4, 2], 4, 0.1, seed=3),
        make_reglog(1, 6, 2, 1.0, seed=4),
    ]


def test_one_dimensional_quadratic():
    P = quadratic_from_components([[[[1.0]]]], [[[-3.0]]])
    assert P.x_star.tolist() == [3.0]
    assert P.component_value(0, 0, [3.0]) == pytest.approx(-4.5)


def test_two_node_averaged_normal_equations():
    P = quadratic_from_components([[[[1.0]]], [[[3.0]]]], [[[-1.0]], [[3.0]]])
    assert P.x_star[0] == pytest.approx(-0.5, abs=1e-15)


def test_generated_quadratic_residual():
    P = make_quadratic(4, 10, 3, 1.0, 10.0, seed=11)
    assert np.linalg.norm(P.global_grad(P.x_star)) < 1e-10


def test_quadratic_constants_are_tight():
    P = make_quadratic(4, 10, 3, 1.0, 10.0, seed=11)
    eig = np.linalg.eigvalsh(P.A)
    assert eig.min() == pytest.approx(1.0, abs=1e-12)
    assert eig.max() == pytest.approx(10.0, abs=1e-12)
    assert P.Q == 10.0


def test_heterogeneous_minimizer_weights():
    # node-average of node means: heterogeneous m_i must not be a flat component average
    one = [[1.0]]
    P = quadratic_from_components([[one, one, one], [one]], [[[0.0], [0.0], [0.0]], [[-4.0]]])
    assert P.x_star[0] == pytest.approx(2.0)  # a flat average over the 4 components gives 1.0


def test_constants_and_counts():
    P = make_quadratic(3, [50, 10, 30], 2, 1.0, 10.0, seed=0)
    assert P.constants() == (1.0, 10.0, 10.0, 50, 10)
    assert (P.M_max, P.m_min) == (50, 10)


def test_component_gradient_examples():
    P = quadratic_from_components([[[[2.0]]]], [[[1.0]]])
    assert P.component_grad(0, 0, [0.0]).tolist() == [1.0]
    R = reglog_from_components([[[0.0, 0.0]]], [[1.0]], lam=0.7)
    x = np.array([0.3, -1.2])
    assert np.array_equal(R.component_grad(0, 0, x), 0.7 * x)
    assert R.component_value(0, 0, x) == pytest.approx(np.log(2) + 0.35 * (x @ x))


def test_reglog_single_component_matches_bisection():
    P = reglog_from_components([[[1.0]]], [[1.0]], lam=1.0)
    # optimality: lam x = y exp(-x) / (1 + exp(-x))
    root = _bisect(lambda x: x - np.exp(-x) / (1 + np.exp(-x)), 0.0, 0.5)
    assert 0 < P.x_star[0] < 0.5
    assert P.x_star[0] == pytest.approx(root, abs=1e-11)


@pytest.mark.parametrize("P", _problems(), ids=lambda P: f"{P.family}-{P.n}")
def test_minimizer_residual(P):
    assert np.linalg.norm(P.global_grad(P.x_star)) <= 1e-8 * (1 + np.linalg.norm(P.x_star))


@pytest.mark.parametrize("P", _problems(), ids=lambda P: f"{P.family}-{P.n}")
def test_gradients_match_finite_differences(P):
    rng = np.random.default_rng(0)
    h = 1e-5
    for i in range(P.n):
        for j in range(P.m[i]):
            x = rng.standard_normal(P.p)
            g = P.component_grad(i, j, x)
            fd = np.array([(P.component_value(i, j, x + h * e) - P.component_value(i, j, x - h * e))
                           / (2 * h) for e in np.eye(P.p)])
            assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(g))


@pytest.mark.parametrize("P", _problems(), ids=lambda P: f"{P.family}-{P.n}")
def test_local_full_grad_is_component_mean(P):
    rng = np.random.default_rng(1)
    X = rng.standard_normal((P.n, P.p))
    stacked = P.local_full_grads(X)
    for i in range(P.n):
        mean = np.mean([P.component_grad(i, j, X[i]) for j in range(P.m[i])], axis=0)
        np.testing.assert_allclose(P.local_full_grad(i, X[i]), mean, rtol=0, atol=1e-14)
        np.testing.assert_allclose(stacked[i], mean, rtol=0, atol=1e-14)
    x = X[0]
    np.testing.assert_allclose(P.global_grad(x),
                               np.mean([P.local_full_grad(i, x) for i in range(P.n)], axis=0),
                               rtol=0, atol=1e-14)


def test_single_component_and_identical_components():
    P = make_quadratic(1, 1, 2, 1.0, 3.0, seed=5)
    x = np.array([0.4, -0.7])
    assert np.array_equal(P.local_full_grad(0, x), P.component_grad(0, 0, x))
    A, b = [[2.0, 0.5], [0.5, 1.0]], [0.1, -0.2]
    Q = quadratic_from_components([[A, A, A]], [[b, b, b]])
    np.testing.assert_allclose(Q.local_full_grad(0, x), Q.component_grad(0, 1, x), atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(range(4)), st.integers(0, 2**32 - 1))
def test_strong_convexity_and_smoothness(which, seed):
    P = _problems()[which]
    rng = np.random.default_rng(seed)
    for _ in range(5):
        i = int(rng.integers(P.n))
        j = int(rng.integers(P.m[i]))
        x, y = rng.standard_normal((2, P.p)) * 3
        fx, fy = P.component_value(i, j, x), P.component_value(i, j, y)
        gx, gy = P.component_grad(i, j, x), P.component_grad(i, j, y)
        d = y - x
        assert fy >= fx + gx @ d + 0.5 * P.mu * (d @ d) - 1e-9 * (1 + abs(fy))
        assert np.linalg.norm(gx - gy) <= P.ell * np.linalg.norm(d) * (1 + 1e-12)


def test_index_and_shape_errors():
    P = make_quadratic(2, 3, 2, 1.0, 2.0, seed=0)
    with pytest.raises(UsageError):
        P.component_grad(2, 0, np.zeros(2))
    with pytest.raises(UsageError):
        P.component_grad(0, 3, np.zeros(2))
    with pytest.raises(UsageError):
        P.local_full_grad(0, np.zeros(3))


@pytest.mark.parametrize("kwargs", [
    dict(mu=0.0, ell=1.0), dict(mu=2.0, ell=1.0), dict(mu=1.0, ell=2.0, m=[1, 0]),
])
def test_quadratic_config_errors(kwargs):
    args = dict(n=2, m=2, p=2, mu=1.0, ell=2.0) | kwargs
    with pytest.raises(ConfigError):
        make_quadratic(**args, seed=0)


def test_reglog_needs_positive_lambda():
    with pytest.raises(ConfigError):
        make_reglog(2, 2, 2, 0.0, seed=0)


@pytest.mark.parametrize("P", _problems(), ids=lambda P: f"{P.family}-{P.n}")
def test_problem_roundtrip_is_exact(P, tmp_path):
    save_problem(P, tmp_path / "p.txt")
    Q = load_problem(tmp_path / "p.txt")
    assert (Q.family, Q.n, Q.m, Q.p, Q.mu, Q.ell, Q.lam) == (P.family, P.n, P.m, P.p, P.mu, P.ell, P.lam)
    for a, b in [(Q.x_star, P.x_star), (Q.A, P.A), (Q.vec, P.vec), (Q.labels, P.labels)]:
        assert np.array_equal(a, b)


def test_load_problem_rejects_garbage(tmp_path):
    f = tmp_path / "p.txt"
    f.write_text("not a problem\n")
    with pytest.raises(ConfigError):
        load_problem(f)
