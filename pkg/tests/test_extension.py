import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lipreg.core import LabeledDataset
from lipreg.extension import (ExtensionError, ExtensionInfeasibleError, extend_multi,
                              extend_one_point, extend_points, iteration_count)
from lipreg.graphs import ConstraintGraph, GraphError, graph_from_edges


def lipschitz_instance(r, n, a, b, L=1.0):
    """Labels from a contraction, so the data is L-Lipschitz by construction."""
    X = r.normal(size=(n, a))
    M = r.normal(size=(b, a))
    M *= L / max(np.linalg.norm(M, 2), 1e-12) * r.uniform(0.3, 1.0)
    Y = np.tanh(X @ M.T)
    return LabeledDataset.from_arrays(X, Y)


def test_forced_midpoint():
    ds = LabeledDataset.from_arrays([[0.0], [2.0]], [[0.0], [2.0]])
    res = extend_one_point(ds, 1.0, [1.0], 0.05)
    assert abs(res.y_star[0] - 1.0) <= 0.05
    assert res.iterations == iteration_count(2, 0.05)
    assert res.max_slack <= 1.05


def test_forced_midpoint_vector_labels():
    ds = LabeledDataset.from_arrays([[0.0], [2.0]], [[0.0, 0.0], [2.0, 0.0]])
    res = extend_one_point(ds, 1.0, [1.0], 0.01)
    assert np.linalg.norm(res.y_star - [1.0, 0.0]) <= 0.05


def test_coincident_query_short_circuit():
    ds = LabeledDataset.from_arrays([[0.0], [1.0], [3.0]], [[5.0], [5.5], [7.0]])
    res = extend_one_point(ds, 1.0, [1.0], 0.1)
    assert res.y_star.tolist() == [5.5] and res.iterations == 0
    assert res.slacks[1] == 0 and np.all(np.isfinite(res.slacks))


def test_infeasible_labels_diagnosed():
    ds = LabeledDataset.from_arrays([[0.0], [2.0]], [[0.0], [20.0]])
    with pytest.raises(ExtensionInfeasibleError) as info:
        extend_one_point(ds, 1.0, [1.0], 0.1)
    assert info.value.worst_slack > 1.1
    assert info.value.result is not None
    assert extend_one_point(ds, 1.0, [1.0], 0.1, check=False).max_slack > 1.1


def test_parameter_validation():
    ds = LabeledDataset.from_arrays([[0.0], [2.0]], [[0.0], [2.0]])
    for eps in (0.0, 0.5, -1.0):
        with pytest.raises(ValueError):
            extend_one_point(ds, 1.0, [1.0], eps)
    with pytest.raises(ValueError):
        extend_one_point(ds, 0.0, [1.0], 0.1)
    with pytest.raises(ValueError):
        extend_one_point(ds, 1.0, [1.0, 2.0], 0.1)
    with pytest.raises(ValueError):
        extend_one_point(ds, 1.0, [1.0], 0.1, update='other')


@given(st.integers(0, 10_000), st.integers(2, 8), st.integers(1, 3), st.integers(1, 3),
       st.sampled_from(['framework', 'literal']))
def test_feasible_ball_width_and_oracle(seed, n, a, b, update):
    r = np.random.default_rng(seed)
    ds = lipschitz_instance(r, n, a, b)
    x = r.normal(size=a)
    eps = 0.2
    res = extend_one_point(ds, 1.0, x, eps, update=update, trace=True)
    assert res.max_slack <= 1 + eps
    # the answer lies in the ball around the nearest neighbour's label
    d0 = np.linalg.norm(ds.X[res.anchor_index] - x)
    assert np.linalg.norm(res.y_star - ds.Y[res.anchor_index]) <= d0 * (1 + 1e-12)
    tr = res.trace
    assert np.all(tr.min_h >= -2 - 1e-9) and np.all(tr.max_h <= 1 + 1e-9)
    if update == 'framework':
        assert np.all(tr.oracle >= -1e-9)
    np.testing.assert_allclose(tr.weight_sum, 1.0, rtol=1e-12)


def test_lipschitz_scaling_invariance(rng):
    ds = lipschitz_instance(rng, 6, 2, 2, L=3.0)
    x = rng.normal(size=2)
    scaled = LabeledDataset(ds.X * 3.0, ds.Y)
    a = extend_one_point(ds, 3.0, x, 0.1).y_star
    b = extend_one_point(scaled, 1.0, x * 3.0, 0.1).y_star
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_smaller_eps_tighter(rng):
    ds = lipschitz_instance(rng, 6, 2, 2)
    x = rng.normal(size=2)
    assert extend_one_point(ds, 1.0, x, 0.05).max_slack <= 1.25


def test_deterministic(rng):
    ds = lipschitz_instance(rng, 6, 2, 2)
    x = rng.normal(size=2)
    a, b = (extend_one_point(ds, 1.0, x, 0.1).y_star for _ in range(2))
    assert a.tobytes() == b.tobytes()


def test_batch_matches_single(rng):
    ds = lipschitz_instance(rng, 15, 3, 2)
    Q = np.vstack([rng.normal(size=(4, 3)), ds.X[2]])
    batch = extend_points(ds, 1.0, Q, 0.1)
    single = np.array([extend_one_point(ds, 1.0, q, 0.1).y_star for q in Q])
    np.testing.assert_allclose(batch, single, rtol=1e-12, atol=1e-14)
    assert batch[-1].tolist() == ds.Y[2].tolist()


def _bipartite(ds, new, extra_edges=()):
    n = ds.n
    pts = np.vstack([ds.X, new])
    edges = [(i, n + k) for k in range(len(new)) for i in range(n)] + list(extra_edges)
    return graph_from_edges(pts, edges, 1.0)


def test_multi_single_point_agrees_with_one_point():
    # constraints pin the answer to (1, 0), so both solvers must land near it
    ds = LabeledDataset.from_arrays([[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]],
                                    [[0.0, 0.0], [2.0, 0.0], [1.0, 2.5]])
    x = np.array([[1.0, 0.0]])
    eps = 0.1
    multi = extend_multi(ds, 1.0, x, _bipartite(ds, x), eps)
    one = extend_one_point(ds, 1.0, x[0], eps)
    assert multi.max_violation <= 1 + eps
    assert np.linalg.norm(multi.labels[0] - one.y_star) <= 2 * eps


def test_multi_chain_forced():
    ds = LabeledDataset.from_arrays([[0.0], [3.0]], [[0.0], [3.0]])
    new = np.array([[1.0], [2.0]])
    g = graph_from_edges(np.vstack([ds.X, new]), [(0, 2), (2, 3), (1, 3)], 1.0)
    eps = 0.05
    res = extend_multi(ds, 1.0, new, g, eps)
    np.testing.assert_allclose(res.labels.ravel(), [1.0, 2.0], atol=3 * eps)
    assert res.max_violation <= 1 + eps


def test_multi_full_length_run(rng):
    ds = lipschitz_instance(rng, 5, 1, 1)
    new = rng.normal(size=(2, 1))
    res = extend_multi(ds, 1.0, new, _bipartite(ds, new, [(5, 6)]), 0.2, early_stop=False)
    assert res.iterations == res.max_iterations and res.max_violation <= 1.2


def test_multi_validation(rng):
    ds = LabeledDataset.from_arrays([[0.0], [3.0]], [[0.0], [3.0]])
    new = np.array([[1.0], [2.0]])
    pts = np.vstack([ds.X, new])
    with pytest.raises(ValueError, match='training'):
        extend_multi(ds, 1.0, new, graph_from_edges(pts, [(0, 1), (0, 2), (2, 3)], 1.0), 0.1)
    with pytest.raises(ValueError, match='not connected'):
        extend_multi(ds, 1.0, new, graph_from_edges(pts, [(0, 2)], 1.0), 0.1)
    with pytest.raises(ValueError, match='vertices'):
        extend_multi(ds, 1.0, new[:1], graph_from_edges(pts, [(0, 2)], 1.0), 0.1)
    with pytest.raises(ValueError, match='lengths'):
        extend_multi(ds, 1.0, new, ConstraintGraph(4, [[0, 2], [1, 3]], [5.0, 5.0], 1.0), 0.1)
    # a new point on top of a training point cannot form an edge
    with pytest.raises(GraphError):
        graph_from_edges(np.vstack([ds.X, [[0.0]]]), [(0, 2)], 1.0)


def test_multi_infeasible():
    ds = LabeledDataset.from_arrays([[0.0], [2.0]], [[0.0], [20.0]])
    new = np.array([[1.0]])
    g = graph_from_edges(np.vstack([ds.X, new]), [(0, 2), (1, 2)], 1.0)
    with pytest.raises(ExtensionError):
        extend_multi(ds, 1.0, new, g, 0.1, max_iterations=200)
