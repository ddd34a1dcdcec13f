"""Choosing the Lipschitz budget: structural risk minimization and cross-validation."""

import logging
from collections import namedtuple

import numpy as np

from .baseline import first_minimum, kfold_indices
from .core import empirical_risk, squared_loss
from .extension import extend_points
from .graphs import build_graph
from .smoothing import feasibility_check, smooth_auto

logger = logging.getLogger(__name__)


def generalization_bound(a, b, L, n, C=1.0):
    """Capacity term ``C L / n^(1/(a+b+1))`` of the risk bound for L-Lipschitz maps R^a -> R^b."""
    if n < 1:
        raise ValueError('n must be at least 1')
    if L < 0 or C <= 0:
        raise ValueError('need L >= 0 and C > 0')
    return C * L / n ** (1.0 / (a + b + 1))


SrmProfile = namedtuple('SrmProfile', [
    'candidate_Ls',    # sorted candidates that were solved successfully
    'risks',           # post-smoothing empirical risk (mean unsquared distance)
    'squared_risks',   # post-smoothing mean squared distance
    'bounds',          # capacity term per candidate
    'objective',       # risks + bounds
    'chosen_L',
    'failed',          # candidates whose smoothing raised, with the error text
])


def default_candidates(dataset, graph_policy='complete', size=10):
    """Geometric grid around the data's own Lipschitz ratio on the constraint graph."""
    ratio = feasibility_check(dataset, build_graph(dataset, 1.0, graph_policy))
    if ratio <= 0:
        return np.array([1.0])
    return np.geomspace(ratio / 10, ratio * 10, size)


def srm_select(dataset, candidate_Ls, eps, C=1.0, graph_policy='complete', **smooth_kwargs):
    """Pick the ``L`` minimizing smoothed empirical risk plus the capacity term.

    Ties go to the smaller ``L``. Candidates whose smoothing fails are
    recorded in ``failed`` and skipped.
    """
    Ls = np.sort(np.asarray(candidate_Ls, dtype=np.float64))
    if len(Ls) == 0:
        raise ValueError('no candidate Lipschitz constants')
    graph = build_graph(dataset, 1.0, graph_policy)
    kept, risks, sq, failed = [], [], [], []
    for L in Ls:
        try:
            res = smooth_auto(dataset, graph, eps, L=L, **smooth_kwargs)
        except Exception as exc:   # noqa: BLE001 - a failed candidate is reported, not fatal
            logger.warning('L=%g failed: %s', L, exc)
            failed.append((float(L), str(exc)))
            continue
        kept.append(float(L))
        risks.append(empirical_risk(res.smoothed_labels, dataset.Y).empirical_risk)
        sq.append(squared_loss(res.smoothed_labels, dataset.Y).empirical_risk)
    if not kept:
        raise RuntimeError('smoothing failed for every candidate')
    kept = np.array(kept)
    risks = np.array(risks)
    bounds = np.array([generalization_bound(dataset.a, dataset.b, L, dataset.n, C) for L in kept])
    objective = risks + bounds
    chosen = float(kept[int(np.argmin(objective))])
    return SrmProfile(kept, risks, np.array(sq), bounds, objective, chosen, failed)


CvResult = namedtuple('CvResult', [
    'candidate_Ls',
    'fold_losses',   # (len(candidates), folds) mean squared validation loss
    'mean_losses',
    'chosen_L',
])


def cross_validate(dataset, candidate_Ls, folds, eps, graph_policy='complete', seed=0,
                   predict_eps=None, **smooth_kwargs):
    """k-fold choice of ``L``: smooth each training split, extend to its held-out points.

    Folds come from a seeded shuffle of the indices. Validation uses the mean
    squared distance; ties go to the smaller ``L``.
    """
    Ls = np.sort(np.asarray(candidate_Ls, dtype=np.float64))
    if len(Ls) == 0:
        raise ValueError('no candidate Lipschitz constants')
    parts = kfold_indices(dataset.n, folds, seed)
    predict_eps = eps if predict_eps is None else predict_eps
    losses = np.zeros((len(Ls), folds))
    for f, test in enumerate(parts):
        train = np.setdiff1d(np.arange(dataset.n), test)
        if len(train) == 0:
            raise ValueError('fold with empty training split')
        sub = dataset.subset(train)
        graph = build_graph(sub, 1.0, graph_policy)
        for c, L in enumerate(Ls):
            smoothed = sub.with_labels(smooth_auto(sub, graph, eps, L=L, **smooth_kwargs)
                                       .smoothed_labels)
            pred = extend_points(smoothed, L, dataset.X[test], predict_eps)
            losses[c, f] = squared_loss(pred, dataset.Y[test]).empirical_risk
    mean = losses.mean(axis=1)
    chosen = float(Ls[first_minimum(mean, dataset.Y)])
    return CvResult(Ls, losses, mean, chosen)
