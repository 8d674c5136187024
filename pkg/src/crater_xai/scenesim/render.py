"""Lambertian-shaded crater bowls over value-noise terrain.

Desk-scale stand-in for an external planetary renderer: the networks only
need crater-like appearance with exact labels, so each crater is a
parabolic depression with a raised rim, lit by a fixed sun, drawn on a
seeded noise texture.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import RenderGeometryError
from ..geometry import CameraModel, Pose


@dataclass
class RenderOptions:
    texture_amp: float = 0.25
    texture_scale_m: float = 400.0
    texture_octaves: int = 3
    sun_azimuth_deg: float = 30.0
    sun_elevation_deg: float = 40.0
    depth_ratio: float = 0.3  # crater depth as a fraction of radius
    rim_height_ratio: float = 0.08
    base_albedo: float = 0.55


def _value_noise(seed, xy, scale_m, octaves):
    """Smooth periodic value noise over world coordinates, seeded."""
    rng = np.random.default_rng(seed)
    out = np.zeros(xy.shape[:-1])
    amp = 1.0
    total = 0.0
    n = 64
    for octave in range(octaves):
        grid = rng.random((n, n))
        s = scale_m / (2**octave)
        fx = np.mod(xy[..., 0] / s, 1.0) * n
        fy = np.mod(xy[..., 1] / s, 1.0) * n
        i0 = np.floor(fx).astype(int) % n
        j0 = np.floor(fy).astype(int) % n
        i1 = (i0 + 1) % n
        j1 = (j0 + 1) % n
        tx = fx - np.floor(fx)
        ty = fy - np.floor(fy)
        # smoothstep weights avoid visible grid creases
        tx = tx * tx * (3 - 2 * tx)
        ty = ty * ty * (3 - 2 * ty)
        v = (
            grid[i0, j0] * (1 - tx) * (1 - ty)
            + grid[i1, j0] * tx * (1 - ty)
            + grid[i0, j1] * (1 - tx) * ty
            + grid[i1, j1] * tx * ty
        )
        out += amp * (v - 0.5)
        total += amp
        amp *= 0.5
    return out / total


def _crater_height_field(field, X, Y, opts):
    """Summed crater relief (metres) sampled at world points X, Y."""
    H = np.zeros_like(X)
    if not field:
        return H
    x_lo, x_hi = X.min(), X.max()
    y_lo, y_hi = Y.min(), Y.max()
    for crater in field:
        cx, cy = crater.center_xy
        r = crater.radius
        reach = 1.4 * r
        if cx + reach < x_lo or cx - reach > x_hi:
            continue
        if cy + reach < y_lo or cy - reach > y_hi:
            continue
        rho = np.hypot(X - cx, Y - cy)
        depth = opts.depth_ratio * r
        bowl = np.where(rho <= r, depth * ((rho / r) ** 2 - 1.0), 0.0)
        rim_band = (rho > r) & (rho <= reach)
        rim = np.where(
            rim_band,
            opts.rim_height_ratio * r
            * np.sin(np.pi * np.clip((rho - r) / (0.4 * r), 0, 1)) ** 2
            * (1.0 - (rho - r) / (0.4 * r)),
            0.0,
        )
        H += bowl + rim
    return H


def render_frame(
    field: list,
    pose: Pose,
    cam: CameraModel,
    seed: int,
    options: RenderOptions = None,
) -> np.ndarray:
    """Render one 8-bit RGB frame, deterministic in all inputs."""
    opts = options or RenderOptions()
    if pose.altitude <= 0:
        raise RenderGeometryError("camera must be above the ground plane")
    w, h = cam.image_size
    R, C = cam.world_to_camera_matrix(pose)
    axis_world = R.T @ np.array([0.0, 0.0, 1.0])
    if axis_world[2] >= -1e-6:
        raise RenderGeometryError("optical axis does not intersect the ground plane")

    u, v = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    uv = np.stack([u.ravel(), v.ravel()], axis=1)
    rays_cam = cam.pixel_rays(uv)
    rays_world = rays_cam @ R
    dz = rays_world[:, 2]
    valid = dz < -1e-9
    t = np.where(valid, -C[2] / np.where(valid, dz, -1.0), 0.0)
    pts = C[None, :] + t[:, None] * rays_world
    X = pts[:, 0].reshape(h, w)
    Y = pts[:, 1].reshape(h, w)

    xy = np.stack([X, Y], axis=-1)
    albedo = opts.base_albedo * (
        1.0
        + 2.0
        * opts.texture_amp
        * _value_noise(seed, xy, opts.texture_scale_m, opts.texture_octaves)
    )

    relief = _crater_height_field(field, X, Y, opts)
    # ground sample distance for world-space slopes (near-nadir approximation)
    gsd = np.maximum(t.reshape(h, w) / cam.focal_px, 1e-6)
    dhy, dhx = np.gradient(relief)
    # image y grows opposite to world y under the nadir camera convention
    sy = np.sign(R[1, 1]) if abs(R[1, 1]) > 1e-12 else 1.0
    sx = np.sign(R[0, 0]) if abs(R[0, 0]) > 1e-12 else 1.0
    nx = -sx * dhx / gsd
    ny = -sy * dhy / gsd
    norm = np.sqrt(nx**2 + ny**2 + 1.0)

    az = np.radians(opts.sun_azimuth_deg)
    el = np.radians(opts.sun_elevation_deg)
    sun = np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
    shade = (nx * sun[0] + ny * sun[1] + sun[2]) / norm
    shade = np.clip(shade / np.sin(el), 0.02, 1.6)

    img = np.clip(albedo * shade, 0.0, 1.0)
    img = np.where(valid.reshape(h, w), img, 0.0)
    img8 = (img * 255.0 + 0.5).astype(np.uint8)
    return np.repeat(img8[:, :, None], 3, axis=2)
