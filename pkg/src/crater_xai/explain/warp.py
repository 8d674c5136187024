"""Pose-induced affine warp between the two halves of a stacked pair.

The exact map between consecutive frames viewing a plane is a homography;
an affine matrix is fitted to it over the image domain because the
correlation statistic is defined on an affine warp.  The fit residual is
retained for inspection.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from ..errors import GeometryError
from ..geometry import CameraModel, Pose


@dataclass
class AffineWarp:
    """2x3 matrix mapping frame-(t+1) pixel coords to frame-t coords."""

    matrix: np.ndarray
    fit_residual_px: float = 0.0

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float).reshape(2, 3)
        if abs(np.linalg.det(self.matrix[:, :2])) < 1e-12:
            raise ValueError("affine linear part must be invertible")

    def is_identity(self) -> bool:
        return np.array_equal(self.matrix, np.array([[1.0, 0.0, 0.0],
                                                     [0.0, 1.0, 0.0]]))


IDENTITY_POSE_Q = np.array([1.0, 0.0, 0.0, 0.0])


def ground_plane_in_camera(pose: Pose, cam: CameraModel):
    """(normal, distance) of the z=0 landing plane in this camera's frame.

    Plane points satisfy normal . p_cam = distance with distance > 0 when
    the plane lies in front of the camera.
    """
    R, C = cam.world_to_camera_matrix(pose)
    normal = -R @ np.array([0.0, 0.0, 1.0])
    return normal, float(C[2])


def affine_from_pose(pose_rel: Pose, cam: CameraModel, ground_plane,
                     grid: int = 5) -> AffineWarp:
    """Affine approximation of the plane-induced homography.

    pose_rel: frame-(t+1) camera expressed in the frame-t camera frame
    (position = t+1 origin in t coords, rotation maps t vectors to t+1
    vectors).  ground_plane: (normal, distance) in the frame-t camera.
    The warp maps frame-(t+1) pixels to frame-t pixels; an exactly
    identical pose returns an exact identity warp.
    """
    if (
        np.array_equal(pose_rel.position, np.zeros(3))
        and np.array_equal(np.abs(pose_rel.rotation), IDENTITY_POSE_Q)
    ):
        return AffineWarp(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    normal, dist = ground_plane
    normal = np.asarray(normal, dtype=float).reshape(3)
    w, h = cam.image_size
    us = np.linspace(0.1 * w, 0.9 * w, grid)
    vs = np.linspace(0.1 * h, 0.9 * h, grid)
    uu, vv = np.meshgrid(us, vs)
    uv_t = np.stack([uu.ravel(), vv.ravel()], axis=1)
    rays = cam.pixel_rays(uv_t)
    denom = rays @ normal
    if np.any(denom <= 1e-9) or dist <= 0:
        raise GeometryError("ground plane is behind the frame-t camera")
    pts_t = rays * (dist / denom)[:, None]
    R_rel = pose_rel.matrix()
    pts_t1 = (pts_t - pose_rel.position) @ R_rel.T
    z1 = pts_t1[:, 2]
    if np.any(z1 <= 1e-9):
        raise GeometryError("ground plane is behind the frame-(t+1) camera")
    uv_t1 = cam.focal_px * pts_t1[:, :2] / z1[:, None] + cam.principal_point
    # least-squares affine fit: uv_t ~ A [uv_t1; 1]
    design = np.hstack([uv_t1, np.ones((len(uv_t1), 1))])
    sol, *_ = np.linalg.lstsq(design, uv_t, rcond=None)
    matrix = sol.T
    residual = float(np.abs(design @ sol - uv_t).max())
    return AffineWarp(matrix, fit_residual_px=residual)


def warp_apply(image: np.ndarray, warp: AffineWarp):
    """Warp a frame-(t+1) image into frame-t coordinates.

    Returns (warped, support) where support marks pixels fully covered by
    source data; warped-in regions without source pixels have support 0.
    An identity warp returns the input bit-exactly.
    """
    if warp.is_identity():
        return image.copy(), np.ones_like(image, dtype=float)
    h, w = image.shape[:2]
    warped = cv2.warpAffine(
        image.astype(np.float64), warp.matrix, (w, h),
        flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT, borderValue=0.0,
    )
    support = cv2.warpAffine(
        np.ones((h, w)), warp.matrix, (w, h),
        flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT, borderValue=0.0,
    )
    return warped, support
