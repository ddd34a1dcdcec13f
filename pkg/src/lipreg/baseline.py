"""Vector-valued Nadaraya-Watson kernel regression."""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import pairwise_distances, squared_loss

UNDERFLOW = 1e-300


def gaussian_kernel(u):
    return np.exp(-0.5 * np.asarray(u) ** 2)


@dataclass(frozen=True)
class NwModel:
    """Kernel-weighted label average ``sum_i k(|x - x_i| / h) y_i / sum_i k(|x - x_i| / h)``."""
    dataset: object
    bandwidth: float
    kernel: Callable = gaussian_kernel

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f'bandwidth must be positive, got {self.bandwidth}')

    def predict(self, queries):
        return nw_predict(self, queries)


def nw_predict(model, x_star):
    """Predict at one query (shape (a,)) or many (shape (q, a)).

    A query whose kernel values all fall below 1e-300 gets the label of its
    nearest training input.
    """
    q = np.asarray(x_star, dtype=np.float64)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    X, Y = model.dataset.X, model.dataset.Y
    D = pairwise_distances(q, X)
    K = model.kernel(D / model.bandwidth)
    total = K.sum(axis=1)
    out = np.empty((len(q), Y.shape[1]))
    ok = K.max(axis=1) > UNDERFLOW
    out[ok] = (K[ok] @ Y) / total[ok, None]
    if np.any(~ok):
        out[~ok] = Y[np.argmin(D[~ok], axis=1)]
    return out[0] if single else out


def kfold_indices(n, folds, seed=0):
    """Shuffled fold assignment: a list of ``folds`` index arrays partitioning ``range(n)``."""
    if not 2 <= folds <= n:
        raise ValueError(f'folds must satisfy 2 <= folds <= n, got folds={folds}, n={n}')
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(perm[k::folds]) for k in range(folds)]


def default_bandwidth_grid(dataset, size=20):
    D = pairwise_distances(dataset.X)
    off = D[np.triu_indices(dataset.n, k=1)]
    lo = max(np.min(off), 1e-12) if len(off) else 1.0
    hi = np.max(off) if len(off) else 1.0
    return np.geomspace(lo, max(hi, lo), size)


def nw_tune_bandwidth(dataset, folds=5, grid=None, seed=0, kernel=gaussian_kernel):
    """Bandwidth from ``grid`` with the lowest k-fold mean squared loss; ties go to the smallest.

    Returns
    -------
    (float, ndarray)
        The chosen bandwidth and the per-bandwidth validation losses.
    """
    grid = np.sort(np.asarray(default_bandwidth_grid(dataset) if grid is None else grid,
                              dtype=np.float64))
    if len(grid) == 1:
        return float(grid[0]), np.array([np.nan])
    parts = kfold_indices(dataset.n, folds, seed)
    losses = np.zeros(len(grid))
    for test in parts:
        train = np.setdiff1d(np.arange(dataset.n), test)
        if len(train) == 0:
            raise ValueError('fold with empty training split')
        sub = dataset.subset(train)
        for g, h in enumerate(grid):
            pred = nw_predict(NwModel(sub, h, kernel), dataset.X[test])
            losses[g] += squared_loss(pred, dataset.Y[test]).empirical_risk * len(test)
    losses /= dataset.n
    return float(grid[first_minimum(losses, dataset.Y)]), losses


def first_minimum(losses, Y):
    """Index of the first loss within rounding of the minimum.

    Losses within ``1e-12`` of the minimum, relative to the minimum or to the
    labels' mean square, count as ties.
    """
    losses = np.asarray(losses)
    tol = 1e-12 * max(losses.min(), float(np.mean(np.asarray(Y) ** 2)), 1e-300)
    return int(np.flatnonzero(losses <= losses.min() + tol)[0])
