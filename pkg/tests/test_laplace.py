import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lipreg.graphs import ConstraintGraph, graph_from_edges
from lipreg.laplace import (ConvergenceError, SingularSystemError, laplace_objective, laplacian,
                            pcg, solve_harmonic, solve_laplace)
from oracles import dense_laplace


def random_connected(r, n, extra):
    X = r.normal(size=(n, 2))
    edges = {(min(k, p), max(k, p)) for k in range(1, n) for p in [int(r.integers(k))]}
    for _ in range(extra):
        i, j = r.choice(n, 2, replace=False)
        edges.add((min(i, j), max(i, j)))
    return graph_from_edges(X, sorted(edges), 1.0)


def test_laplacian_properties(rng):
    g = random_connected(rng, 12, 10)
    mu = rng.uniform(0.1, 2.0, g.m)
    A = laplacian(g, mu).toarray()
    np.testing.assert_allclose(A, A.T)
    np.testing.assert_allclose(A @ np.ones(g.n), 0, atol=1e-12)
    assert np.linalg.eigvalsh(A).min() > -1e-10


def test_zero_edge_weights_identity(rng):
    g = random_connected(rng, 6, 3)
    Y = rng.normal(size=(6, 2))
    np.testing.assert_array_equal(solve_laplace(g, Y, 1.0, np.zeros(g.m)), Y)


def test_large_vertex_weight_limit(rng):
    g = random_connected(rng, 10, 5)
    Y = rng.normal(size=(10, 3))
    for method in ('direct', 'cg'):
        Z = solve_laplace(g, Y, 1e12, np.ones(g.m), method=method)
        np.testing.assert_allclose(Z, Y, atol=1e-6)


def test_two_vertex_example():
    g = ConstraintGraph(2, [[0, 1]], [1.0], 1.0)
    for method in ('direct', 'cg'):
        Z = solve_laplace(g, np.array([[0.0], [3.0]]), [1.0, 1.0], [1.0], method=method)
        np.testing.assert_allclose(Z.ravel(), [1.0, 2.0], atol=1e-12)


@given(st.integers(0, 10_000), st.integers(2, 30), st.integers(1, 3))
def test_matches_dense_solve(seed, n, b):
    r = np.random.default_rng(seed)
    g = random_connected(r, n, n)
    lam = r.uniform(0.0, 2.0, n)
    lam[r.integers(n)] = 1.0
    mu = r.uniform(0.01, 5.0, g.m)
    Y = r.normal(size=(n, b))
    ref = dense_laplace(n, g.edges, lam, mu, Y)
    for method in ('direct', 'cg'):
        Z = solve_laplace(g, Y, lam, mu, method=method)
        assert np.linalg.norm(Z - ref) <= 1e-8 * max(np.linalg.norm(ref), 1e-300)
        psi, psi_ref = (laplace_objective(Y, W, g, lam, mu) for W in (Z, ref))
        assert psi <= psi_ref + 1e-8 * psi_ref + 1e-300


def test_columns_separable(rng):
    g = random_connected(rng, 15, 10)
    mu = rng.uniform(0.1, 3, g.m)
    Y = rng.normal(size=(15, 3))
    joint = solve_laplace(g, Y, 0.5, mu, method='cg')
    cols = np.column_stack([solve_laplace(g, Y[:, k], 0.5, mu, method='cg') for k in range(3)])
    np.testing.assert_allclose(joint, cols, rtol=1e-9, atol=1e-12)


def test_residual_contract(rng):
    g = random_connected(rng, 40, 60)
    lam = np.full(40, 0.3)
    mu = rng.uniform(0.1, 10, g.m)
    Y = rng.normal(size=(40, 2))
    Z = solve_laplace(g, Y, lam, mu, tol=1e-10, method='cg')
    A = laplacian(g, mu) + np.diag(lam)
    assert np.linalg.norm(A @ Z - lam[:, None] * Y) <= 1e-10 * np.linalg.norm(lam[:, None] * Y)


def test_singular_system():
    g = ConstraintGraph(4, [[0, 1], [2, 3]], [1.0, 1.0], 1.0)
    with pytest.raises(SingularSystemError) as info:
        solve_laplace(g, np.zeros((4, 1)), [1.0, 0.0, 0.0, 0.0], [1.0, 1.0])
    assert info.value.component == {2, 3}


def test_pcg_reports_nonconvergence(rng):
    M = rng.normal(size=(30, 30))
    A = M @ M.T + 1e-6 * np.eye(30)
    with pytest.raises(ConvergenceError) as info:
        pcg(A, rng.normal(size=(30, 1)), tol=1e-14, maxiter=2)
    assert info.value.residual > 0


def test_harmonic_chain():
    # vertices 0 and 3 pinned at 0 and 3; unit weights make the middle linear
    g = graph_from_edges(np.array([[0.0], [3.0], [1.0], [2.0]]), [(0, 2), (2, 3), (1, 3)], 1.0)
    Z = solve_harmonic(g, [0, 1], np.array([[0.0], [3.0]]), np.ones(3))
    np.testing.assert_allclose(Z.ravel(), [1.0, 2.0], atol=1e-12)
