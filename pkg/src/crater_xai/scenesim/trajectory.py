"""Parabolic descent trajectories with Gaussian perturbations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from ..geometry import NADIR_QUAT, Pose, quat_mul


@dataclass
class Trajectory:
    """Ordered (frame_index, Pose) descent from high to low altitude."""

    frames: list

    def __len__(self):
        return len(self.frames)

    def altitudes(self) -> np.ndarray:
        return np.array([p.altitude for _, p in self.frames])

    def poses(self) -> list:
        return [p for _, p in self.frames]


def nominal_descent(n_frames, start_alt_m, end_alt_m, downrange_m):
    """Noise-free parabola in the altitude-vs-downrange plane."""
    x = np.linspace(downrange_m, 0.0, n_frames)
    z = end_alt_m + (start_alt_m - end_alt_m) * (x / downrange_m) ** 2
    pos = np.zeros((n_frames, 3))
    pos[:, 0] = x
    pos[:, 2] = z
    return pos


def generate_trajectory(
    seed: int,
    n_frames: int,
    start_alt_m: float = 1500.0,
    end_alt_m: float = 200.0,
    noise_sigma: float = 0.0,
    downrange_m: float = 800.0,
    att_sigma_deg: float = 0.0,
) -> Trajectory:
    """Seeded descent trajectory: nominal parabola plus Gaussian jitter.

    Attitude is nadir-pointing with optional small random perturbations.
    """
    if n_frames < 2:
        raise ValueError("n_frames must be at least 2")
    if not (start_alt_m > end_alt_m > 0):
        raise ValueError("need start_alt_m > end_alt_m > 0")
    rng = np.random.default_rng(seed)
    pos = nominal_descent(n_frames, start_alt_m, end_alt_m, downrange_m)
    if noise_sigma > 0:
        pos = pos + rng.normal(0.0, noise_sigma, size=pos.shape)
    frames = []
    for i in range(n_frames):
        q = NADIR_QUAT
        if att_sigma_deg > 0:
            rotvec = rng.normal(0.0, np.radians(att_sigma_deg), size=3)
            dq = Rotation.from_rotvec(rotvec).as_quat(scalar_first=True)
            q = quat_mul(dq, NADIR_QUAT)
            q = q / np.linalg.norm(q)
        frames.append((i, Pose(pos[i], q)))
    return Trajectory(frames)
