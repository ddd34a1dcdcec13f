"""
Transferring poses between robot arms
=====================================

A 5-link expert arm and a 3-link learner arm of equal total length. The
learner's target pose puts its end effector on the expert's and otherwise
stays as close as possible to the expert's shape. We learn the map from
expert joint angles to learner joint angles and compare with kernel
regression.

Set HALF_RANGE below pi to draw expert angles from a narrower range.
"""

import numpy as np

from lipreg.pipeline import PipelineConfig, run_experiment
from lipreg.robokin import ArmConfig, ground_truth_pose

HALF_RANGE = np.pi

# one expert pose and its learner counterpart
expert = ArmConfig((0.6,) * 5, (0.3, -0.4, 0.8, 0.2, -0.5))
learner, residual = ground_truth_pose(expert)
print('expert end effector :', np.round(expert.end_effector(), 6))
print('learner end effector:', np.round(learner.end_effector(), 6))
print('learner angles      :', np.round(learner.joint_angles, 4), ' residual', round(residual, 4))

# a small version of the loss-versus-size experiment (about a minute)
config = PipelineConfig(graph_policy='knn:16', epsilon=0.1, seed=0)
result = run_experiment((50, 200), test_n=50, cfg=config, half_range=HALF_RANGE)
print('\n n_train   MWU loss   NW loss      L')
for row in result.rows:
    print(f"{row['n_train']:8d}  {row['mwu_loss']:9.4f}  {row['nw_loss']:8.4f}  {row['L']:6.3f}")
