"""Continuity-preserving 6D rotation encoding and Euler extraction."""

from __future__ import annotations

import torch

from ..errors import NumericalDegeneracyError

_EPS = 1e-8


def rot6d_to_matrix(r6: torch.Tensor) -> torch.Tensor:
    """Gram-Schmidt decode of a (...,6) vector into a rotation matrix.

    The two 3-vectors become the first two columns after orthonormalisation;
    the third column is their cross product, so det(R) = +1.
    """
    r6 = torch.as_tensor(r6)
    if r6.shape[-1] != 6:
        raise ValueError(f"expected (...,6) input, got {tuple(r6.shape)}")
    a1 = r6[..., :3]
    a2 = r6[..., 3:]
    n1 = a1.norm(dim=-1, keepdim=True)
    if torch.any(n1 < _EPS):
        raise NumericalDegeneracyError("first 6d vector has near-zero norm")
    b1 = a1 / n1
    proj = (b1 * a2).sum(dim=-1, keepdim=True)
    u2 = a2 - proj * b1
    n2 = u2.norm(dim=-1, keepdim=True)
    if torch.any(n2 < _EPS):
        raise NumericalDegeneracyError("6d vectors are (near-)parallel")
    b2 = u2 / n2
    b3 = torch.cross(b1, b2, dim=-1)
    return torch.stack([b1, b2, b3], dim=-1)


def matrix_to_rot6d(R: torch.Tensor) -> torch.Tensor:
    """First two columns of a rotation matrix, flattened to (...,6)."""
    R = torch.as_tensor(R)
    return torch.cat([R[..., :, 0], R[..., :, 1]], dim=-1)


def euler_zyx_from_matrix_t(R: torch.Tensor) -> torch.Tensor:
    """Intrinsic ZYX (yaw, pitch, roll) angles; differentiable away from
    the pitch singularity."""
    R = torch.as_tensor(R)
    yaw = torch.atan2(R[..., 1, 0], R[..., 0, 0])
    pitch = torch.asin(torch.clamp(-R[..., 2, 0], -1 + 1e-12, 1 - 1e-12))
    roll = torch.atan2(R[..., 2, 1], R[..., 2, 2])
    return torch.stack([yaw, pitch, roll], dim=-1)


def wrap_angle_t(a: torch.Tensor) -> torch.Tensor:
    """Wrap angle differences into (-pi, pi], differentiable a.e."""
    return torch.atan2(torch.sin(a), torch.cos(a))
