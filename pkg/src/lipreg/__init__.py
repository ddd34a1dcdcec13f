"""Lipschitz-constrained regression between metric spaces.

Smooth noisy labels into an L-Lipschitz labelling, then extend that
labelling to new inputs, both with multiplicative-weights solvers.
"""

__version__ = '0.1.0'

from .baseline import NwModel, nw_predict, nw_tune_bandwidth
from .core import (DatasetError, LabeledDataset, empirical_risk, load_dataset, save_dataset,
                   squared_loss)
from .extension import (ExtensionError, ExtensionInfeasibleError, extend_multi,
                        extend_one_point, extend_points)
from .graphs import ConstraintGraph, build_graph, complete_graph, greedy_spanner, knn_graph
from .laplace import solve_harmonic, solve_laplace
from .selection import cross_validate, generalization_bound, srm_select
from .smoothing import SmoothingInfeasibleError, feasibility_check, smooth, smooth_auto

__all__ = [
    'ConstraintGraph', 'DatasetError', 'ExtensionError', 'ExtensionInfeasibleError',
    'LabeledDataset', 'NwModel', 'SmoothingInfeasibleError', 'build_graph', 'complete_graph',
    'cross_validate', 'empirical_risk', 'extend_multi', 'extend_one_point', 'extend_points',
    'feasibility_check', 'generalization_bound', 'greedy_spanner', 'knn_graph', 'load_dataset',
    'nw_predict', 'nw_tune_bandwidth', 'save_dataset', 'smooth', 'smooth_auto', 'solve_harmonic',
    'solve_laplace', 'squared_loss', 'srm_select',
]
