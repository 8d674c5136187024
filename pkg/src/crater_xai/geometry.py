"""Coordinate frames, poses and the pinhole camera.

Conventions:
  - Landing-site frame O_L: origin at the ideal landing point, z up,
    craters in the z=0 plane.
  - Pose.rotation is a unit quaternion (w,x,y,z) mapping landing-frame
    vectors into body-frame vectors: v_b = R(q) v_l.
  - Camera frame: x right, y down, z along the optical axis.  At nadir
    the body/camera rotation relative to O_L is diag(1,-1,-1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

NADIR_QUAT = np.array([0.0, 1.0, 0.0, 0.0])  # 180 deg about x: z_cam points down


def quat_to_matrix(q):
    """Rotation matrix from a (w,x,y,z) unit quaternion."""
    q = np.asarray(q, dtype=float)
    return Rotation.from_quat(q, scalar_first=True).as_matrix()


def matrix_to_quat(R):
    q = Rotation.from_matrix(R).as_quat(scalar_first=True)
    if q[0] < 0:
        q = -q
    return q


def quat_mul(a, b):
    ra = Rotation.from_quat(a, scalar_first=True)
    rb = Rotation.from_quat(b, scalar_first=True)
    return (ra * rb).as_quat(scalar_first=True)


@dataclass
class Pose:
    """Lander pose: position in O_L plus body-from-landing rotation."""

    position: np.ndarray
    rotation: np.ndarray  # quaternion (w,x,y,z)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(4)
        n = np.linalg.norm(self.rotation)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {n} not within 1e-9 of 1")

    @property
    def altitude(self) -> float:
        return float(self.position[2])

    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def world_to_body(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return (pts - self.position) @ self.matrix().T

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.position, other.position) and np.array_equal(
            self.rotation, other.rotation
        )


def relative_pose(pose_t: Pose, pose_t1: Pose, cam: "CameraModel") -> Pose:
    """Pose of the frame-(t+1) camera expressed in the frame-t camera frame.

    Position is the t+1 camera origin in frame-t camera coordinates;
    rotation maps frame-t camera vectors to frame-(t+1) camera vectors.
    """
    R_c = quat_to_matrix(cam.body_to_camera)
    R_t = R_c @ pose_t.matrix()
    R_t1 = R_c @ pose_t1.matrix()
    t_rel = R_t @ (pose_t1.position - pose_t.position)
    R_rel = R_t1 @ R_t.T
    return Pose(t_rel, matrix_to_quat(R_rel))


@dataclass
class CameraModel:
    """Pinhole camera with square pixels."""

    focal_px: float
    principal_point: np.ndarray
    image_size: tuple = (256, 256)  # (width, height)
    body_to_camera: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0])
    )

    def __post_init__(self):
        self.principal_point = np.asarray(self.principal_point, dtype=float).reshape(2)
        self.body_to_camera = np.asarray(self.body_to_camera, dtype=float).reshape(4)
        if self.focal_px <= 0:
            raise ValueError("focal_px must be positive")
        w, h = self.image_size
        cx, cy = self.principal_point
        if not (0 <= cx < w and 0 <= cy < h):
            raise ValueError("principal point outside image bounds")

    def world_to_camera_matrix(self, pose: Pose):
        """(R, C): p_cam = R (p_world - C)."""
        R = quat_to_matrix(self.body_to_camera) @ pose.matrix()
        return R, pose.position

    def project(self, pts_world: np.ndarray, pose: Pose) -> tuple:
        """Project world points; returns (uv, z_cam)."""
        R, C = self.world_to_camera_matrix(pose)
        pc = (np.atleast_2d(pts_world) - C) @ R.T
        z = pc[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            uv = self.focal_px * pc[:, :2] / z[:, None] + self.principal_point
        return uv, z

    def pixel_rays(self, uv: np.ndarray) -> np.ndarray:
        """Unit-free camera-frame ray directions for pixel coordinates."""
        uv = np.atleast_2d(uv)
        d = np.empty((uv.shape[0], 3))
        d[:, :2] = (uv - self.principal_point) / self.focal_px
        d[:, 2] = 1.0
        return d

    def to_dict(self) -> dict:
        return {
            "focal_px": float(self.focal_px),
            "principal_point": [float(v) for v in self.principal_point],
            "image_size": [int(v) for v in self.image_size],
            "body_to_camera": [float(v) for v in self.body_to_camera],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(
            focal_px=d["focal_px"],
            principal_point=np.array(d["principal_point"]),
            image_size=tuple(d["image_size"]),
            body_to_camera=np.array(d["body_to_camera"]),
        )


def default_camera(image_size=(256, 256), hfov_deg=60.0) -> CameraModel:
    """Nadir-friendly default intrinsics: 60 deg horizontal FOV, centred pp."""
    w, h = image_size
    focal = (w / 2) / np.tan(np.radians(hfov_deg / 2))
    return CameraModel(focal_px=focal, principal_point=np.array([w / 2, h / 2]),
                       image_size=image_size)


def euler_zyx_from_matrix(R: np.ndarray) -> np.ndarray:
    """Intrinsic ZYX (yaw, pitch, roll) Euler angles in radians."""
    return Rotation.from_matrix(R).as_euler("ZYX")


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a), 2 * np.pi)
