from .rotation6d import euler_zyx_from_matrix_t, matrix_to_rot6d, rot6d_to_matrix
from .model import PoseNavigator, split_pose9, stack_pair
from .losses import FineLossWeights, coarse_loss, fine_loss, pose9_residuals
from .train import NavigatorSchedule, cyclical_lr, train_navigator

__all__ = [
    "FineLossWeights",
    "NavigatorSchedule",
    "PoseNavigator",
    "coarse_loss",
    "cyclical_lr",
    "euler_zyx_from_matrix_t",
    "fine_loss",
    "matrix_to_rot6d",
    "pose9_residuals",
    "rot6d_to_matrix",
    "split_pose9",
    "stack_pair",
    "train_navigator",
]
