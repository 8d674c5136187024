"""Seeded crater field generation on the planar landing site."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class CraterEntry:
    """A crater in the landing-site frame: planar centre (m) and radius (m)."""

    center_xy: np.ndarray
    radius: float

    def __post_init__(self):
        self.center_xy = np.asarray(self.center_xy, dtype=float).reshape(2)
        self.radius = float(self.radius)
        if self.radius <= 0:
            raise ValueError("crater radius must be positive")

    def __eq__(self, other):
        if not isinstance(other, CraterEntry):
            return NotImplemented
        return (
            np.array_equal(self.center_xy, other.center_xy)
            and self.radius == other.radius
        )


def sample_power_law(rng, count, exponent, r_min, r_max):
    """Inverse-CDF sampling of pdf ~ r**exponent on [r_min, r_max]."""
    u = rng.random(count)
    a = exponent + 1.0
    if abs(a) < 1e-12:
        return r_min * (r_max / r_min) ** u
    lo, hi = r_min**a, r_max**a
    return (lo + u * (hi - lo)) ** (1.0 / a)


def generate_crater_field(
    seed: int,
    area_m: float,
    count: int,
    radius_law=(-2.0, 5.0, 150.0),
) -> list:
    """Uniformly placed craters with power-law radii, deterministic in seed.

    radius_law is (exponent, r_min_m, r_max_m); centres are uniform on
    [-area_m/2, area_m/2]^2.
    """
    if area_m <= 0:
        raise ValueError("area_m must be positive")
    if count < 0:
        raise ValueError("count must be nonnegative")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-area_m / 2, area_m / 2, size=(count, 2))
    exponent, r_min, r_max = radius_law
    radii = sample_power_law(rng, count, exponent, r_min, r_max)
    return [CraterEntry(c, r) for c, r in zip(centers, radii)]
