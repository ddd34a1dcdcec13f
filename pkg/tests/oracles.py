"""Independent reference solvers used to check the library."""

import itertools

import cvxpy as cp
import numpy as np


def qcqp_smoothing(Y, edges, radii):
    """Optimal distortion and labels of the smoothing problem, by a conic solver."""
    Y = np.asarray(Y, dtype=np.float64)
    Z = cp.Variable(Y.shape)
    cons = [cp.norm(Z[i] - Z[j]) <= r for (i, j), r in zip(edges, radii)]
    prob = cp.Problem(cp.Minimize(cp.sum_squares(Z - Y)), cons)
    prob.solve(solver='CLARABEL')
    return float(prob.value), np.asarray(Z.value)


def grid_feasible_point(X, Y, L, x_star, eps, step=1e-3):
    """Any label on a grid of spacing ``step`` meeting every relaxed constraint.

    Searches the ball around the nearest neighbour's label; returns None if
    the grid holds no feasible point.
    """
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    r = L * np.linalg.norm(X - x_star, axis=1)
    k = int(np.argmin(r))
    b = Y.shape[1]
    ticks = np.arange(-r[k], r[k] + step, step)
    best = None
    for chunk in _grid_chunks(ticks, b):
        P = Y[k] + chunk
        S = np.linalg.norm(P[:, None, :] - Y[None], axis=2) / r
        ok = np.all(S <= 1 + eps, axis=1)
        if np.any(ok):
            best = P[np.argmax(ok)]
            break
    return best


def _grid_chunks(ticks, b, size=200_000):
    if b == 1:
        yield ticks[:, None]
        return
    rows = max(1, size // len(ticks))
    for start in range(0, len(ticks), rows):
        a = ticks[start:start + rows]
        yield np.column_stack([np.repeat(a, len(ticks)), np.tile(ticks, len(a))])


def dense_laplace(n, edges, lam, mu, Y):
    A = np.diag(np.broadcast_to(np.asarray(lam, float), (n,))).astype(float)
    for (i, j), w in zip(edges, mu):
        A[i, i] += w
        A[j, j] += w
        A[i, j] -= w
        A[j, i] -= w
    return np.linalg.solve(A, np.broadcast_to(np.asarray(lam, float), (n,))[:, None] * Y)


def floyd_warshall(n, edges, lengths):
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0.0)
    for (i, j), w in zip(edges, lengths):
        D[i, j] = D[j, i] = min(D[i, j], w)
    for k in range(n):
        D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
    return D


def brute_knn_pairs(X, k):
    n = len(X)
    out = set()
    for i in range(n):
        d = [(np.linalg.norm(X[i] - X[j]), j) for j in range(n) if j != i]
        for _, j in sorted(d)[:k]:
            out.add((min(i, j), max(i, j)))
    return out


def brute_max_ratio(X, Y):
    best = 0.0
    for i, j in itertools.combinations(range(len(X)), 2):
        best = max(best, np.linalg.norm(Y[i] - Y[j]) / np.linalg.norm(X[i] - X[j]))
    return best
