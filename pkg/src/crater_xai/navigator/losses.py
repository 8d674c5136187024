"""Coarse and fine pose losses with Euler-angle orientation residuals."""

from __future__ import annotations

import torch
import torch.nn as nn

from .model import split_pose9
from .rotation6d import euler_zyx_from_matrix_t, rot6d_to_matrix, wrap_angle_t


def pose9_residuals(pred9: torch.Tensor, gt_pos: torch.Tensor, gt_R: torch.Tensor):
    """Squared residual norms per sample: (pos (N,), angle (N,)).

    Orientation residuals are wrapped ZYX Euler-angle differences between
    the decoded prediction and the ground-truth rotation matrices.
    """
    pos, r6 = split_pose9(pred9)
    pred_euler = euler_zyx_from_matrix_t(rot6d_to_matrix(r6))
    gt_euler = euler_zyx_from_matrix_t(torch.as_tensor(gt_R))
    d_ang = wrap_angle_t(pred_euler - gt_euler)
    return ((pos - gt_pos) ** 2).sum(-1), (d_ang**2).sum(-1)


def coarse_loss(pred9, gt_pos, gt_R, kappa: float = 100.0) -> torch.Tensor:
    """Mean over samples of ||dP||^2 + kappa * ||d_euler||^2."""
    pred9 = torch.as_tensor(pred9)
    if pred9.shape[0] != torch.as_tensor(gt_pos).shape[0]:
        raise ValueError("prediction / ground-truth length mismatch")
    pos_sq, ang_sq = pose9_residuals(pred9, torch.as_tensor(gt_pos), gt_R)
    return (pos_sq + kappa * ang_sq).mean()


class FineLossWeights(nn.Module):
    """Learnable homoscedastic weights for the fine training stage."""

    def __init__(self, sigma_p: float = 0.0, sigma_phi: float = 0.0):
        super().__init__()
        self.sigma_p = nn.Parameter(torch.tensor(float(sigma_p)))
        self.sigma_phi = nn.Parameter(torch.tensor(float(sigma_phi)))


def fine_loss(pred9, gt_pos, gt_R, weights: FineLossWeights) -> torch.Tensor:
    """L_p exp(-sigma_p) + L_phi exp(-sigma_phi) + sigma_p + sigma_phi.

    L_p and L_phi are the summed squared position and wrapped Euler-angle
    residuals; at sigma = 0 the loss reduces to L_p + L_phi.
    """
    pred9 = torch.as_tensor(pred9)
    if pred9.shape[0] != torch.as_tensor(gt_pos).shape[0]:
        raise ValueError("prediction / ground-truth length mismatch")
    pos_sq, ang_sq = pose9_residuals(pred9, torch.as_tensor(gt_pos), gt_R)
    l_p = pos_sq.sum()
    l_phi = ang_sq.sum()
    return (
        l_p * torch.exp(-weights.sigma_p)
        + l_phi * torch.exp(-weights.sigma_phi)
        + weights.sigma_p
        + weights.sigma_phi
    )
