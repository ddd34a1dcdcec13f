"""Weighted graph Laplacians and the regularized Laplace problem.

Given labels ``Y``, vertex weights ``lam`` and edge weights ``mu`` over a
graph, the minimizer of

    sum_i lam_i |y_i - z_i|^2 + sum_{(i,j) in E} mu_ij |z_i - z_j|^2

solves ``(Lap + diag(lam)) Z = diag(lam) Y``, one independent system per
label coordinate.
"""

from collections import namedtuple

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix, diags
from scipy.sparse.csgraph import connected_components

DEFAULT_TOL = 1e-10
DIRECT_MAX_N = 300


class LaplaceError(RuntimeError):
    pass


class SingularSystemError(LaplaceError):
    """Some connected component carries no positive vertex weight."""

    def __init__(self, component):
        super().__init__(f'singular Laplace system: component {sorted(component)[:10]} '
                         'has no positive vertex weight')
        self.component = component


class ConvergenceError(LaplaceError):
    def __init__(self, residual, iterations):
        super().__init__(f'PCG did not converge in {iterations} iterations '
                         f'(relative residual {residual:.3e})')
        self.residual = residual
        self.iterations = iterations


PCGInfo = namedtuple('PCGInfo', ['iterations', 'residual'])
_EdgeSet = namedtuple('_EdgeSet', ['n', 'edges', 'm'])


def laplacian(graph, mu):
    """Sparse weighted Laplacian ``L_ii = sum_j mu_ij``, ``L_ij = -mu_ij``."""
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape != (graph.m,):
        raise ValueError(f'expected {graph.m} edge weights, got shape {mu.shape}')
    if np.any(mu < 0):
        raise ValueError('edge weights must be non-negative')
    n = graph.n
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    deg = np.bincount(i, weights=mu, minlength=n) + np.bincount(j, weights=mu, minlength=n)
    rows = np.r_[i, j, np.arange(n)]
    cols = np.r_[j, i, np.arange(n)]
    vals = np.r_[-mu, -mu, deg]
    return coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def laplace_objective(Y, Z, graph, lam, mu):
    """Value of the Laplace objective at ``Z``."""
    Y = np.asarray(Y, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    fidelity = np.sum(np.asarray(lam) * np.sum((Y - Z) ** 2, axis=1))
    d = Z[graph.edges[:, 0]] - Z[graph.edges[:, 1]]
    return float(fidelity + np.sum(np.asarray(mu) * np.sum(d * d, axis=1)))


def _check_definite(graph, lam, mu):
    active = np.asarray(mu) > 0
    e = graph.edges[active]
    adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(graph.n, graph.n))
    ncomp, labels = connected_components(adj, directed=False)
    has_weight = np.bincount(labels, weights=(np.asarray(lam) > 0), minlength=ncomp) > 0
    if not np.all(has_weight):
        c = int(np.flatnonzero(~has_weight)[0])
        raise SingularSystemError(set(np.flatnonzero(labels == c).tolist()))


def pcg(A, B, tol=DEFAULT_TOL, X0=None, maxiter=None, restart=None):
    """Jacobi-preconditioned conjugate gradients on all columns of ``B`` at once.

    Each column is iterated until its residual norm drops below ``tol`` times
    the norm of that column of ``B``. The search directions are reset from the
    true residual every ``restart`` iterations (default ``n``).

    Returns
    -------
    X : ndarray, same shape as B
    info : PCGInfo
        Iteration count and the worst final relative residual.
    """
    B = np.asarray(B, dtype=np.float64)
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    n, b = B.shape
    maxiter = 10 * n * b if maxiter is None else maxiter
    restart = max(n, 1) if restart is None else restart
    dinv = 1.0 / A.diagonal()
    X = np.zeros_like(B) if X0 is None else np.array(X0, dtype=np.float64).reshape(n, b)
    bnorm = np.linalg.norm(B, axis=0)
    target = tol * np.where(bnorm > 0, bnorm, 1.0)

    it = 0
    while True:
        R = B - A @ X
        rnorm = np.linalg.norm(R, axis=0)
        if np.all(rnorm <= target) or it >= maxiter:
            break
        Zp = dinv[:, None] * R
        P = Zp.copy()
        rz = np.sum(R * Zp, axis=0)
        for _ in range(restart):
            active = rnorm > target
            if not np.any(active) or it >= maxiter:
                break
            AP = A @ P
            pap = np.sum(P * AP, axis=0)
            alpha = np.where(active & (pap > 0), rz / np.where(pap > 0, pap, 1.0), 0.0)
            X += alpha * P
            R -= alpha * AP
            rnorm = np.linalg.norm(R, axis=0)
            Zp = dinv[:, None] * R
            rz_new = np.sum(R * Zp, axis=0)
            beta = np.where(rz > 0, rz_new / np.where(rz > 0, rz, 1.0), 0.0)
            P = Zp + beta * P
            rz = rz_new
            it += 1
    rel = float(np.max(rnorm / np.where(bnorm > 0, bnorm, 1.0)))
    if np.any(rnorm > target):
        raise ConvergenceError(rel, it)
    return (X[:, 0] if squeeze else X), PCGInfo(it, rel)


class LaplaceSystem:
    """Repeated Laplace solves on a fixed edge set with changing weights.

    The sparsity pattern (or dense scatter indices) is built once so that each
    :meth:`solve` only assembles values. Definiteness is the caller's
    responsibility; :func:`solve_laplace` checks it.
    """

    def __init__(self, graph, method='auto'):
        if method == 'auto':
            method = 'direct' if graph.n <= DIRECT_MAX_N else 'cg'
        if method not in ('direct', 'cg'):
            raise ValueError(f'unknown method {method!r}')
        self.method = method
        self.n = n = graph.n
        self.m = graph.m
        i, j = np.asarray(graph.edges[:, 0]), np.asarray(graph.edges[:, 1])
        self._i, self._j = i, j
        diag = np.arange(n)
        if method == 'direct':
            self._flat = np.r_[i * n + j, j * n + i, i * (n + 1), j * (n + 1), diag * (n + 1)]
        else:
            self._rows = np.r_[i, j, diag]
            self._cols = np.r_[j, i, diag]

    def matrix(self, lam, mu):
        n = self.n
        lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (n,))
        mu = np.asarray(mu, dtype=np.float64)
        deg = (np.bincount(self._i, weights=mu, minlength=n)
               + np.bincount(self._j, weights=mu, minlength=n))
        if self.method == 'direct':
            vals = np.r_[-mu, -mu, mu, mu, lam]
            return np.bincount(self._flat, weights=vals, minlength=n * n).reshape(n, n)
        return coo_matrix((np.r_[-mu, -mu, deg + lam], (self._rows, self._cols)),
                          shape=(n, n)).tocsr()

    def solve(self, Y, lam, mu, tol=DEFAULT_TOL, X0=None):
        lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (self.n,))
        A = self.matrix(lam, mu)
        rhs = lam[:, None] * Y
        if self.method == 'direct':
            return scipy.linalg.cho_solve(scipy.linalg.cho_factor(A, check_finite=False),
                                          rhs, check_finite=False)
        Z, _ = pcg(A, rhs, tol=tol, X0=X0)
        return Z


def solve_laplace(graph, Y, lam, mu, tol=DEFAULT_TOL, method='auto', X0=None):
    """Minimize the Laplace objective over ``Z`` (shape n x b).

    Parameters
    ----------
    graph : ConstraintGraph
        Edge structure; only ``graph.n`` and ``graph.edges`` are used.
    Y : array (n, b)
        Target labels.
    lam : float or array (n,)
        Non-negative vertex weights.
    mu : array (m,)
        Non-negative edge weights.
    tol : float
        Relative residual required of every coordinate system.
    method : {'auto', 'cg', 'direct'}
        ``cg`` runs preconditioned conjugate gradients; ``direct`` factorizes
        the dense matrix; ``auto`` picks ``direct`` for n <= 300.
    X0 : array (n, b), optional
        Warm start for ``cg``.

    Raises
    ------
    SingularSystemError
        If a connected component (through edges with positive weight) has no
        positive vertex weight.
    ConvergenceError
        If ``cg`` hits its iteration cap.
    """
    Y = np.asarray(Y, dtype=np.float64)
    squeeze = Y.ndim == 1
    if squeeze:
        Y = Y[:, None]
    n = graph.n
    if Y.shape[0] != n:
        raise ValueError(f'expected {n} labels, got {Y.shape[0]}')
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (n,))
    if np.any(lam < 0):
        raise ValueError('vertex weights must be non-negative')
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape != (graph.m,):
        raise ValueError(f'expected {graph.m} edge weights, got shape {mu.shape}')
    if np.any(mu < 0):
        raise ValueError('edge weights must be non-negative')
    _check_definite(graph, lam, mu)
    Z = LaplaceSystem(graph, method).solve(Y, lam, mu, tol=tol, X0=X0)
    return Z[:, 0] if squeeze else Z


def solve_harmonic(graph, fixed, fixed_values, mu, tol=DEFAULT_TOL, method='auto', X0=None):
    """Minimize ``sum_E mu_ij |z_i - z_j|^2`` with ``z`` pinned on the ``fixed`` vertices.

    Returns the values at the free vertices, in increasing vertex order. The
    free block reduces to a Laplace problem whose vertex weight is the total
    edge weight to pinned neighbours and whose target is their weighted mean.
    """
    n = graph.n
    fixed = np.asarray(fixed, dtype=np.intp)
    is_fixed = np.zeros(n, dtype=bool)
    is_fixed[fixed] = True
    free = np.flatnonzero(~is_fixed)
    values = np.zeros((n, np.asarray(fixed_values).reshape(len(fixed), -1).shape[1]))
    values[fixed] = np.asarray(fixed_values, dtype=np.float64).reshape(len(fixed), -1)
    pos = -np.ones(n, dtype=np.intp)
    pos[free] = np.arange(len(free))

    i, j = graph.edges[:, 0], graph.edges[:, 1]
    mu = np.asarray(mu, dtype=np.float64)
    fi, fj = is_fixed[i], is_fixed[j]
    inner = ~fi & ~fj
    cross = fi ^ fj
    u = np.where(fi[cross], j[cross], i[cross])   # free endpoint
    k = np.where(fi[cross], i[cross], j[cross])   # pinned endpoint
    w = mu[cross]
    nf = len(free)
    lam = np.bincount(pos[u], weights=w, minlength=nf)
    pull = np.zeros((nf, values.shape[1]))
    np.add.at(pull, pos[u], w[:, None] * values[k])
    target = np.divide(pull, lam[:, None], out=np.zeros_like(pull), where=lam[:, None] > 0)

    sub_edges = np.column_stack([pos[i[inner]], pos[j[inner]]])
    sub = _EdgeSet(nf, sub_edges, len(sub_edges))
    return solve_laplace(sub, target, lam, mu[inner], tol=tol, method=method, X0=X0)
