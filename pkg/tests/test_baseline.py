import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lipreg.baseline import NwModel, kfold_indices, nw_predict, nw_tune_bandwidth
from lipreg.core import LabeledDataset, pairwise_distances


def test_tiny_bandwidth_interpolates(rng):
    ds = LabeledDataset.from_arrays(rng.normal(size=(10, 2)), rng.normal(size=(10, 3)))
    D = pairwise_distances(ds.X)
    h = 1e-6 * D[np.triu_indices(10, 1)].min()
    np.testing.assert_allclose(nw_predict(NwModel(ds, h), ds.X[4]), ds.Y[4], atol=1e-9)


def test_huge_bandwidth_centroid(rng):
    ds = LabeledDataset.from_arrays(rng.normal(size=(10, 2)), rng.normal(size=(10, 3)))
    diam = pairwise_distances(ds.X).max()
    np.testing.assert_allclose(NwModel(ds, 1e9 * diam).predict(rng.normal(size=2)),
                               ds.Y.mean(axis=0), atol=1e-6)


def test_symmetric_midpoint():
    ds = LabeledDataset.from_arrays([[-1.0], [1.0]], [[0.0, 2.0], [4.0, 0.0]])
    np.testing.assert_allclose(NwModel(ds, 0.7).predict([0.0]), [2.0, 1.0])


def test_underflow_falls_back_to_nearest():
    ds = LabeledDataset.from_arrays([[0.0], [1.0]], [[5.0], [7.0]])
    assert NwModel(ds, 1e-3).predict([100.0]).tolist() == [7.0]
    with pytest.raises(ValueError):
        NwModel(ds, 0.0)


@given(st.integers(0, 10_000), st.floats(0.05, 10.0))
def test_convex_hull_and_permutation(seed, h):
    r = np.random.default_rng(seed)
    ds = LabeledDataset.from_arrays(r.normal(size=(12, 2)), r.normal(size=(12, 2)))
    Q = r.normal(size=(5, 2)) * 3
    P = NwModel(ds, h).predict(Q)
    assert np.all(P >= ds.Y.min(axis=0) - 1e-12) and np.all(P <= ds.Y.max(axis=0) + 1e-12)
    perm = r.permutation(12)
    P2 = NwModel(ds.subset(perm), h).predict(Q)
    np.testing.assert_allclose(P, P2, rtol=1e-12, atol=1e-12)


def test_tune_linear_prefers_small_bandwidth():
    X = np.linspace(0, 1, 40)[:, None]
    ds = LabeledDataset.from_arrays(X, 3 * X)
    grid = np.geomspace(0.01, 1.0, 8)
    h, losses = nw_tune_bandwidth(ds, 5, grid)
    assert h <= grid[1]
    assert losses.shape == (8,)


def test_tune_constant_labels_and_single_grid():
    ds = LabeledDataset.from_arrays(np.arange(10.0)[:, None], np.ones((10, 1)))
    assert nw_tune_bandwidth(ds, 5, [3.0, 0.2, 1.0])[0] == 0.2
    assert nw_tune_bandwidth(ds, 5, [0.7])[0] == 0.7


def test_kfold_partition():
    parts = kfold_indices(11, 3, seed=2)
    assert sorted(np.concatenate(parts).tolist()) == list(range(11))
    assert parts[0].tolist() == kfold_indices(11, 3, seed=2)[0].tolist()
    with pytest.raises(ValueError):
        kfold_indices(3, 4)
