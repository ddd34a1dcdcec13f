"""Approximate Kirszbraun extension of a Lipschitz map to new inputs.

Both solvers are multiplicative-weights schemes over the Lipschitz
constraints. Input distances are multiplied by ``L`` up front, so every
constraint reads ``|y - y_i| <= r_i`` with ``r_i = L |x - x_i|``.
"""

import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from .laplace import DEFAULT_TOL, solve_harmonic

COINCIDENT_TOL = 1e-12


class ExtensionError(RuntimeError):
    pass


class ExtensionInfeasibleError(ExtensionError):
    """The averaged answer violates the relaxed constraints.

    Usually the training labels are not ``L``-Lipschitz: smooth them first or
    raise ``L``.
    """

    def __init__(self, worst_slack, worst_index, result=None):
        super().__init__(f'extension infeasible: slack {worst_slack:.6g} at constraint '
                         f'{worst_index}; labels are not Lipschitz at this budget')
        self.worst_slack = worst_slack
        self.worst_index = worst_index
        self.result = result


ExtensionTrace = namedtuple('ExtensionTrace', [
    'min_h',     # per iteration, min_i h_i(z_t)
    'max_h',     # per iteration, max_i h_i(z_t)
    'oracle',    # per iteration, sum_i w_i h_i(z_t) with the weights fed to the oracle
    'weight_sum',
])


@dataclass
class ExtensionResult:
    y_star: np.ndarray
    slacks: np.ndarray
    iterations: int
    anchor_index: int
    epsilon: float
    trace: ExtensionTrace = field(default=None, repr=False)

    @property
    def max_slack(self):
        return float(np.max(self.slacks)) if len(self.slacks) else 0.0


def iteration_count(n, eps):
    return max(1, math.ceil(16.0 * math.log(n) / eps ** 2))


def _check_eps(eps):
    if not 0 < eps < 0.5:
        raise ValueError(f'epsilon must lie in (0, 1/2), got {eps}')


def _slacks(z, Y, r):
    dist = np.linalg.norm(Y - z, axis=1)
    out = np.zeros_like(dist)
    pos = r > 0
    out[pos] = dist[pos] / r[pos]
    return out


def extend_one_point(dataset, L, x_star, eps, update='framework', check=True, trace=False):
    """Predict the label of ``x_star`` so that every ``|y* - y_i| <= (1+eps) L |x* - x_i|``.

    Parameters
    ----------
    dataset : LabeledDataset
        Training pairs; the labels should be ``L``-Lipschitz.
    L : float
        Lipschitz budget.
    x_star : array (a,)
        Query input.
    eps : float
        Precision, in (0, 1/2).
    update : {'framework', 'literal'}
        Weight update. ``framework`` multiplies ``w_i`` by ``1 + (eps/8)(s_i - 1)``
        with ``s_i = |z - y_i| / r_i``; ``literal`` multiplies by ``1 + eps s_i / 8``.
    check : bool
        Raise :class:`ExtensionInfeasibleError` when the answer's worst slack
        exceeds ``1 + eps``.
    trace : bool
        Record per-iteration width and oracle diagnostics.

    Returns
    -------
    ExtensionResult
    """
    _check_eps(eps)
    if not L > 0:
        raise ValueError('L must be positive')
    X, Y = dataset.X, dataset.Y
    x_star = np.asarray(x_star, dtype=np.float64).reshape(-1)
    if x_star.shape != (dataset.a,):
        raise ValueError(f'query has dimension {x_star.size}, expected {dataset.a}')
    n = dataset.n
    r = L * np.linalg.norm(X - x_star, axis=1)
    anchor = int(np.argmin(r))
    y0, d0 = Y[anchor], r[anchor]

    if d0 < COINCIDENT_TOL * L:
        y = Y[anchor].copy()
        slacks = _slacks(y, Y, np.where(np.arange(n) == anchor, 0.0, r))
        return ExtensionResult(y, slacks, 0, anchor, eps)

    T = iteration_count(n, eps)
    eta = eps / 8.0
    inv_r2 = 1.0 / r ** 2
    w = np.full(n, 1.0 / n)
    zsum = np.zeros(dataset.b)
    if trace:
        tr = np.empty((4, T))
    for t in range(T):
        p = w * inv_r2
        p /= p.sum()
        z0 = p @ Y
        delta = np.linalg.norm(z0 - y0)
        z = z0 if delta <= d0 else y0 + (d0 / delta) * (z0 - y0)
        s = np.linalg.norm(Y - z, axis=1) / r
        if trace:
            h = 1.0 - s
            tr[:, t] = h.min(), h.max(), w @ h, w.sum()
        if update == 'framework':
            w = w * (1.0 + eta * (s - 1.0))
        elif update == 'literal':
            w = w * (1.0 + eta * s)
        else:
            raise ValueError(f'unknown update rule {update!r}')
        w /= w.sum()
        zsum += z
    y = zsum / T
    result = ExtensionResult(y, _slacks(y, Y, r), T, anchor, eps,
                             ExtensionTrace(*tr) if trace else None)
    if check and result.max_slack > 1.0 + eps:
        worst = int(np.argmax(result.slacks))
        raise ExtensionInfeasibleError(result.max_slack, worst, result)
    return result


def extend_points(dataset, L, queries, eps, update='framework', check=False):
    """Extend to every row of ``queries`` at once; returns (q, b) labels.

    Runs the single-point scheme for all queries in lockstep, so the answers
    match :func:`extend_one_point` up to floating-point summation order.
    """
    _check_eps(eps)
    if not L > 0:
        raise ValueError('L must be positive')
    if update not in ('framework', 'literal'):
        raise ValueError(f'unknown update rule {update!r}')
    X, Y = dataset.X, dataset.Y
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if Q.shape[1] != dataset.a:
        raise ValueError(f'queries have dimension {Q.shape[1]}, expected {dataset.a}')
    R = L * cdist(Q, X)
    anchor = np.argmin(R, axis=1)
    rows = np.arange(len(Q))
    d0 = R[rows, anchor]
    y0 = Y[anchor]
    out = y0.copy()
    live = d0 >= COINCIDENT_TOL * L
    if np.any(live):
        R, y0, d0 = R[live], y0[live], d0[live]
        T = iteration_count(dataset.n, eps)
        eta = eps / 8.0
        inv_r2 = 1.0 / R ** 2
        W = np.full(R.shape, 1.0 / dataset.n)
        zsum = np.zeros((len(R), dataset.b))
        for _ in range(T):
            P = W * inv_r2
            Z0 = (P @ Y) / P.sum(axis=1, keepdims=True)
            delta = np.linalg.norm(Z0 - y0, axis=1)
            scale = np.where(delta <= d0, 1.0, d0 / np.maximum(delta, 1e-300))
            Z = y0 + scale[:, None] * (Z0 - y0)
            S = cdist(Z, Y) / R
            W = W * (1.0 + eta * (S - 1.0)) if update == 'framework' else W * (1.0 + eta * S)
            W /= W.sum(axis=1, keepdims=True)
            zsum += Z
        out[live] = zsum / T
    if check:
        R_all = L * cdist(Q, X)
        with np.errstate(divide='ignore', invalid='ignore'):
            S = np.where(R_all > 0, cdist(out, Y) / R_all, 0.0)
        worst = float(S.max())
        if worst > 1.0 + eps:
            raise ExtensionInfeasibleError(worst, int(np.unravel_index(S.argmax(), S.shape)[1]))
    return out


MultiExtensionResult = namedtuple('MultiExtensionResult', [
    'labels',         # (n', b) predicted labels for the new points
    'max_violation',  # max over E of |y_i - y_j| / r_ij at the answer
    'iterations',
    'max_iterations',
])


def extend_multi(dataset, L, new_points, graph, eps, c1=8.0, c2=1.0 / 8.0,
                 max_iterations=None, early_stop=True, check=True, tol=DEFAULT_TOL):
    """Extend the map to several new points jointly over a constraint graph.

    Vertices ``0..n-1`` of ``graph`` are the training inputs (labels fixed) and
    ``n..n+n'-1`` are ``new_points``. Every edge must touch a new vertex and
    every new vertex must be connected to a training vertex. The constraints
    ``|y_i - y_j| <= (1+eps) L |x_i - x_j|`` are enforced on the edges.

    With ``early_stop`` the loop ends at the first iteration whose running
    average of iterates meets all relaxed constraints.
    """
    _check_eps(eps)
    if not L > 0:
        raise ValueError('L must be positive')
    new_points = np.atleast_2d(np.asarray(new_points, dtype=np.float64))
    n, n_new = dataset.n, len(new_points)
    if graph.n != n + n_new:
        raise ValueError(f'graph has {graph.n} vertices, expected {n + n_new}')
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    if np.any(j < n):
        raise ValueError('edges between two training points are not allowed')
    points = np.vstack([dataset.X, new_points])
    lengths = np.linalg.norm(points[i] - points[j], axis=1)
    if not np.allclose(lengths, graph.lengths, rtol=1e-12, atol=0):
        raise ValueError('graph edge lengths do not match the supplied points')
    adj = coo_matrix((np.ones(graph.m), (i, j)), shape=(graph.n, graph.n))
    _, comp = connected_components(adj, directed=False)
    anchored = set(comp[:n].tolist())
    orphans = [k for k in range(n, n + n_new) if comp[k] not in anchored]
    if orphans:
        raise ValueError(f'new vertices {orphans[:10]} are not connected to any training point')

    m = graph.m
    r = L * lengths
    T = int(c1 * math.ceil(math.sqrt(m) * math.log(n + n_new) / eps ** 2))
    if max_iterations is not None:
        T = min(T, int(max_iterations))
    T = max(T, 1)
    w = np.full(m, 1.0 / m)
    full = np.vstack([dataset.Y, np.zeros((n_new, dataset.b))])
    total = np.zeros((n_new, dataset.b))
    Z = None
    for t in range(1, T + 1):
        mu = (w + eps / m) / r ** 2
        Z = solve_harmonic(graph, np.arange(n), dataset.Y, mu, tol=tol, X0=Z)
        full[n:] = Z
        ratio = np.linalg.norm(full[i] - full[j], axis=1) / r
        w = w * (1.0 + c2 * eps * (ratio - 1.0))
        w /= w.sum()
        total += Z
        if early_stop:
            full[n:] = total / t
            if np.max(np.linalg.norm(full[i] - full[j], axis=1) / r) <= 1.0 + eps:
                break
    labels = total / t
    full[n:] = labels
    viol = float(np.max(np.linalg.norm(full[i] - full[j], axis=1) / r))
    result = MultiExtensionResult(labels, viol, t, T)
    if check and viol > 1.0 + eps:
        raise ExtensionError(f'multi-point extension infeasible: worst edge ratio {viol:.6g}')
    return result
