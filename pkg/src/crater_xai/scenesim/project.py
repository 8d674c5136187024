"""Exact 2D crater labels from pinhole projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import CameraModel, Pose


@dataclass
class CraterLabel2D:
    """Image-frame crater circle: centre and radius in pixels."""

    center_px: np.ndarray
    radius_px: float

    def __post_init__(self):
        self.center_px = np.asarray(self.center_px, dtype=float).reshape(2)
        self.radius_px = float(self.radius_px)


def project_craters(
    field: list,
    pose: Pose,
    cam: CameraModel,
    r_min_px: float = 2.0,
    r_max_px: float = 50.0,
    n_rim_points: int = 16,
) -> list:
    """Project crater circles into the image and filter to the usable band.

    The pixel radius is the mean distance from the projected centre to
    projected rim points.  Craters behind the camera, with centres outside
    the image, or outside [r_min_px, r_max_px] are dropped.
    """
    if not field:
        return []
    w, h = cam.image_size
    theta = np.linspace(0, 2 * np.pi, n_rim_points, endpoint=False)
    rim_dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)

    centers = np.array([[c.center_xy[0], c.center_xy[1], 0.0] for c in field])
    uv_c, z_c = cam.project(centers, pose)

    labels = []
    for k, crater in enumerate(field):
        if z_c[k] <= 1e-6:
            continue
        cx, cy = uv_c[k]
        if not (0 <= cx < w and 0 <= cy < h):
            continue
        rim_world = np.zeros((n_rim_points, 3))
        rim_world[:, 0] = crater.center_xy[0] + crater.radius * rim_dirs[:, 0]
        rim_world[:, 1] = crater.center_xy[1] + crater.radius * rim_dirs[:, 1]
        uv_r, z_r = cam.project(rim_world, pose)
        if np.any(z_r <= 1e-6):
            continue
        radius_px = float(np.mean(np.linalg.norm(uv_r - uv_c[k], axis=1)))
        if not (r_min_px <= radius_px <= r_max_px):
            continue
        labels.append(CraterLabel2D(uv_c[k], radius_px))
    return labels
