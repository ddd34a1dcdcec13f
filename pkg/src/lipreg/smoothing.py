"""Lipschitz smoothing: the least-squares perturbation of the labels that makes
them ``L``-Lipschitz on a constraint graph.

The quadratically constrained problem

    minimize    sum_i |y_i - z_i|^2
    subject to  |z_i - z_j| <= L |x_i - x_j|   for (i, j) in E

is solved approximately by multiplicative weights over the ``m + 1``
constraints ``h_phi(Z) = 1 - sqrt(Phi(Y, Z) / phi0) >= 0`` and
``h_ij(Z) = 1 - |z_i - z_j| / r_ij >= 0``; each oracle call is one Laplace
solve.
"""

import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .laplace import DEFAULT_TOL, LaplaceSystem, solve_laplace

logger = logging.getLogger(__name__)

# edge ratios this close to 1 count as satisfied (rounding in |y_i - y_j| / r_ij)
FEASIBLE_TOL = 1e-12


class SmoothingInfeasibleError(RuntimeError):
    """The distortion budget ``phi0`` is too small for the constraints."""

    def __init__(self, phi0, violation, distortion, certified, iterations):
        why = 'certified by the oracle bound' if certified else 'after the iteration budget'
        super().__init__(f'phi0={phi0:.6g} infeasible ({why}): edge violation '
                         f'{violation:.6g}, distortion {distortion:.6g}')
        self.phi0 = phi0
        self.violation = violation
        self.distortion = distortion
        self.certified = certified
        self.iterations = iterations


SmoothingTrace = namedtuple('SmoothingTrace', [
    'oracle',      # w_phi h_phi + sum_e w_e h_e at each oracle answer
    'min_h_phi',   # h_phi at each oracle answer
    'min_h_edge',  # min_e h_e at each oracle answer
    'quadratic',   # lambda Phi + sum_e mu_e |z_i - z_j|^2 at each oracle answer
])


@dataclass
class SmoothingResult:
    smoothed_labels: np.ndarray
    distortion: float
    phi0_used: float
    max_edge_violation: float
    iterations: int
    max_iterations: int = 0
    epsilon: float = None
    phi0_trials: list = field(default_factory=list)
    trace: SmoothingTrace = field(default=None, repr=False)

    def report(self):
        return {
            'distortion': self.distortion,
            'phi0_used': self.phi0_used,
            'max_edge_violation': self.max_edge_violation,
            'iterations': self.iterations,
            'max_iterations': self.max_iterations,
            'epsilon': self.epsilon,
            'phi0_trials': [list(p) for p in self.phi0_trials],
        }


def distortion(Y, Z):
    return float(np.sum((np.asarray(Y) - np.asarray(Z)) ** 2))


def edge_ratios(graph, Z):
    Z = np.asarray(Z)
    if graph.m == 0:
        return np.zeros(0)
    d = Z[graph.edges[:, 0]] - Z[graph.edges[:, 1]]
    return np.sqrt(np.einsum('ij,ij->i', d, d)) / graph.radii


def feasibility_check(dataset, graph, L=None):
    """Largest ``|y_i - y_j| / (L |x_i - x_j|)`` over the edges (0 with no edges)."""
    if L is not None:
        graph = graph.with_lipschitz(L)
    ratios = edge_ratios(graph, dataset.Y)
    return float(ratios.max()) if len(ratios) else 0.0


def iteration_budget(m, n, eps, c1=8.0):
    return max(1, int(c1 * math.ceil(math.sqrt(m) * math.log(max(n, 2)) / eps ** 2)))


def oracle_step(graph, Y, weights, phi0, eps, tol=DEFAULT_TOL, method='auto', X0=None,
                system=None):
    """One oracle answer for the weighted constraint problem.

    ``weights`` is ``(w_phi, w_edges)`` summing to one. The answer minimizes
    ``lam Phi(Y, Z) + sum_e mu_e |z_i - z_j|^2`` with
    ``mu_e = (w_e + eps/(m+1)) / r_e^2`` and ``lam = (w_phi + eps/(m+1)) / phi0``.
    When ``phi0`` is at least the optimal distortion the answer satisfies
    ``w_phi h_phi + sum_e w_e h_e >= -eps``.
    """
    w_phi, w_edges = weights
    w_edges = np.asarray(w_edges, dtype=np.float64)
    m = graph.m
    mu = (w_edges + eps / (m + 1)) / graph.radii ** 2
    lam = (w_phi + eps / (m + 1)) / phi0
    if system is None:
        return solve_laplace(graph, Y, lam, mu, tol=tol, method=method, X0=X0)
    return system.solve(Y, lam, mu, tol=tol, X0=X0)


def constraint_values(graph, Y, Z, phi0):
    """``(h_phi, h_edges)`` at ``Z``."""
    return 1.0 - math.sqrt(distortion(Y, Z) / phi0), 1.0 - edge_ratios(graph, Z)


def _trivial(dataset, phi0, eps):
    return SmoothingResult(np.array(dataset.Y), 0.0, phi0, 0.0, 0, 0, eps)


def smooth(dataset, graph, eps, phi0, L=None, c1=8.0, c2=1.0 / 8.0, max_iterations=None,
           early_stop=False, trace=False, tol=DEFAULT_TOL, method='auto'):
    """Smooth the labels for a fixed distortion budget ``phi0``.

    Parameters
    ----------
    dataset : LabeledDataset
    graph : ConstraintGraph
        Edges to constrain; its Lipschitz constant is replaced by ``L`` if given.
    eps : float
        Precision in (0, 1/2).
    phi0 : float
        Distortion budget, ideally within ``1 + eps`` above the optimum.
    c1, c2 : float
        Iteration-count and step-size constants.
    max_iterations : int, optional
        Cap on the ``c1 ceil(sqrt(m) ln n / eps^2)`` iteration budget.
    early_stop : bool
        Stop at the first iteration whose running average already satisfies
        ``Phi <= (1+eps)^2 phi0`` and every edge ratio ``<= 1 + eps``.
    trace : bool
        Record the oracle certificate values of every iteration.

    Returns
    -------
    SmoothingResult
        The average of the oracle answers.

    Raises
    ------
    SmoothingInfeasibleError
        When an oracle answer proves ``phi0`` is below the optimum, or when
        the final average misses either guarantee.
    """
    if not 0 < eps < 0.5:
        raise ValueError(f'epsilon must lie in (0, 1/2), got {eps}')
    if L is not None:
        graph = graph.with_lipschitz(L)
    if graph.n != dataset.n:
        raise ValueError(f'graph has {graph.n} vertices but dataset has {dataset.n} points')
    Y = dataset.Y
    if feasibility_check(dataset, graph) <= 1.0 + FEASIBLE_TOL:
        return _trivial(dataset, phi0, eps)
    if not phi0 > 0:
        raise SmoothingInfeasibleError(phi0, feasibility_check(dataset, graph), 0.0, True, 0)

    m, n = graph.m, dataset.n
    T = iteration_budget(m, n, eps, c1)
    if max_iterations is not None:
        T = max(1, min(T, int(max_iterations)))
    w_phi = 1.0 / (m + 1)
    w = np.full(m, 1.0 / (m + 1))
    total = np.zeros_like(Y)
    Z = None
    budget = (1.0 + eps) ** 2 * phi0
    rows = [] if trace else None
    system = LaplaceSystem(graph, method)
    for t in range(1, T + 1):
        Z = oracle_step(graph, Y, (w_phi, w), phi0, eps, tol=tol, X0=Z, system=system)
        phi = distortion(Y, Z)
        ratios = edge_ratios(graph, Z)
        lam = (w_phi + eps / (m + 1)) / phi0
        mu = (w + eps / (m + 1)) / graph.radii ** 2
        quad = lam * phi + float(np.sum(mu * (ratios * graph.radii) ** 2))
        if trace:
            h_phi = 1.0 - math.sqrt(phi / phi0)
            h_e = 1.0 - ratios
            rows.append((w_phi * h_phi + w @ h_e, h_phi, h_e.min(), quad))
        if quad > (1.0 + eps) * (1.0 + 1e-9):
            # the minimum of the oracle objective exceeds its value at any
            # solution with distortion <= phi0, so no such solution exists
            raise SmoothingInfeasibleError(phi0, float(ratios.max()), phi, True, t)
        w_phi *= 1.0 + c2 * eps * (math.sqrt(phi / phi0) - 1.0)
        w = w * (1.0 + c2 * eps * (ratios - 1.0))
        total_w = w_phi + w.sum()
        w_phi /= total_w
        w /= total_w
        total += Z
        if early_stop:
            avg = total / t
            if (distortion(Y, avg) <= budget
                    and edge_ratios(graph, avg).max() <= 1.0 + eps):
                break
    avg = total / t
    phi = distortion(Y, avg)
    viol = float(edge_ratios(graph, avg).max())
    if phi > budget or viol > 1.0 + eps:
        raise SmoothingInfeasibleError(phi0, viol, phi, False, t)
    return SmoothingResult(avg, phi, phi0, viol, t, T, eps,
                           trace=SmoothingTrace(*map(np.array, zip(*rows))) if trace else None)


def centroid_distortion(Y):
    Y = np.asarray(Y)
    return distortion(Y, np.broadcast_to(Y.mean(axis=0), Y.shape))


def gap_lower_bound(dataset, graph):
    """Distortion forced by the single worst edge: moving both ends costs ``excess^2 / 2``."""
    if graph.m == 0:
        return 0.0
    d = dataset.Y[graph.edges[:, 0]] - dataset.Y[graph.edges[:, 1]]
    excess = np.maximum(np.linalg.norm(d, axis=1) - graph.radii, 0.0)
    return float(np.max(excess) ** 2 / 2.0)


def smooth_auto(dataset, graph, eps, L=None, polish=True, **kwargs):
    """Smooth the labels, searching for the distortion budget ``phi0``.

    The search starts at the single-edge lower bound, doubles until a run
    succeeds and then bisects geometrically until the failing and succeeding
    budgets are within a factor ``1 + eps``. Search runs stop early at the
    first feasible running average. The centroid labelling bounds the search
    from above; it is always feasible and is returned as is if every run up
    to its distortion fails.

    With ``polish`` the chosen budget is re-run for the full iteration count,
    whose average sits closer to the optimum than the early-stopped one. A
    failing full run raises the budget by a factor ``1 + eps`` and retries;
    the early-stopped result is kept if no budget below the centroid's works.
    """
    kwargs.pop('early_stop', None)
    if L is not None:
        graph = graph.with_lipschitz(L)
    if feasibility_check(dataset, graph) <= 1.0 + FEASIBLE_TOL:
        return _trivial(dataset, 0.0, eps)
    hi_cap = centroid_distortion(dataset.Y)
    trials = []

    def attempt(phi0, early_stop=True):
        try:
            res = smooth(dataset, graph, eps, phi0, early_stop=early_stop, **kwargs)
        except SmoothingInfeasibleError as exc:
            trials.append((phi0, False, exc.iterations))
            logger.debug('phi0=%.6g failed: %s', phi0, exc)
            return None
        trials.append((phi0, True, res.iterations))
        return res

    lo = 0.0
    phi0 = max(gap_lower_bound(dataset, graph), 1e-12 * hi_cap, 1e-300)
    best = None
    while phi0 < hi_cap:
        best = attempt(phi0)
        if best is not None:
            break
        lo = phi0
        phi0 *= 2.0
    if best is None:
        best = attempt(hi_cap)
        if best is None:
            Z = np.broadcast_to(dataset.Y.mean(axis=0), dataset.Y.shape).copy()
            best = SmoothingResult(Z, hi_cap, hi_cap, float(edge_ratios(graph, Z).max()),
                                   0, 0, eps)
    hi = best.phi0_used
    while lo > 0 and hi / lo > 1.0 + eps:
        mid = math.sqrt(lo * hi)
        res = attempt(mid)
        if res is None:
            lo = mid
        else:
            best, hi = res, mid
    if polish and best.iterations > 0:
        # a full-length run that fails signals phi0 below the optimum: step up
        phi0 = best.phi0_used
        while phi0 < hi_cap:
            final = attempt(phi0, early_stop=False)
            if final is not None:
                best = final
                break
            phi0 *= 1.0 + eps
    best.phi0_trials = trials
    return best
