"""
Choosing the Lipschitz constant
===============================

A noisy sine curve. Too small an L flattens the signal, too large an L
fits the noise. Cross-validation scores held-out squared loss; structural
risk minimization adds the capacity term C L / n^(1/(a+b+1)) to the
training risk.
"""

import numpy as np

from lipreg import LabeledDataset, cross_validate, srm_select

rng = np.random.default_rng(0)
x = np.sort(rng.uniform(0, 2 * np.pi, 60))[:, None]
y = np.sin(x) + rng.normal(scale=0.3, size=x.shape)
data = LabeledDataset.from_arrays(x, y)

candidates = np.geomspace(0.25, 16, 7)

cv = cross_validate(data, candidates, folds=5, eps=0.1, graph_policy='knn:8', seed=0)
print('   L     CV loss')
for L, loss in zip(cv.candidate_Ls, cv.mean_losses):
    print(f'{L:6.2f}  {loss:8.4f}')
print('cross-validation picks L =', round(cv.chosen_L, 3))

srm = srm_select(data, candidates, eps=0.1, C=1.0, graph_policy='knn:8')
print('\n   L     risk    bound   objective')
for row in zip(srm.candidate_Ls, srm.risks, srm.bounds, srm.objective):
    print('{:6.2f}  {:6.4f}  {:6.4f}  {:6.4f}'.format(*row))
print('SRM picks L =', round(srm.chosen_L, 3))
