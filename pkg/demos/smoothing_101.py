"""
Smoothing noisy labels, then extending them
===========================================

Three points on a line carry a spike that no 1-Lipschitz function can fit.
Smoothing moves the labels as little as possible (in squared distance)
until they are 1-Lipschitz; extension then predicts between them.
"""

import numpy as np

from lipreg import LabeledDataset, complete_graph, extend_one_point, smooth_auto

data = LabeledDataset.from_arrays([[0.0], [1.0], [2.0]], [[0.0], [10.0], [0.0]])

# every pair is constrained: |z_i - z_j| <= L |x_i - x_j|
graph = complete_graph(data, L=1.0)
result = smooth_auto(data, graph, eps=0.05)

# the exact answer is (3, 4, 3) with distortion 54
print('smoothed labels :', np.round(result.smoothed_labels.ravel(), 3))
print('distortion      :', round(result.distortion, 3))
print('worst edge ratio:', round(result.max_edge_violation, 4))
print('budget searched :', [round(p[0], 2) for p in result.phi0_trials])

# predictions between the smoothed points respect the same constant
smoothed = data.with_labels(result.smoothed_labels)
for x in (0.5, 1.5, 3.0):
    pred = extend_one_point(smoothed, 1.0, [x], eps=0.05)
    print(f'f({x}) = {pred.y_star[0]:.3f}   worst slack {pred.max_slack:.3f}')
