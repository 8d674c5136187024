"""Graded ring ground-truth masks for attention evaluation.

Crater interiors are 0, four concentric rim bands step 0.2 to 0.8
outward, and the background is 1.  Overlapping craters resolve to the
per-pixel minimum so every crater keeps its ring signature.
"""

from __future__ import annotations

import numpy as np

RING_VALUES = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
ALPHAS = (1.1, 1.2, 1.3, 1.4)


def ring_mask(labels: list, size=(256, 256), alphas=ALPHAS) -> np.ndarray:
    """Build the graded mask for one image's crater labels.

    Bands are half-open: distance d <= r is interior (0); each band k
    covers alpha_{k-1} r < d <= alpha_k r; beyond alpha_4 r is background.
    """
    h, w = size
    mask = np.ones((h, w))
    if not labels:
        return mask
    yy, xx = np.mgrid[0:h, 0:w]
    for lab in labels:
        cx, cy = lab.center_px
        r = lab.radius_px
        d = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
        value = np.ones((h, w))
        bounds = [r] + [a * r for a in alphas]
        for k in range(len(alphas), 0, -1):
            value = np.where(
                (d > bounds[k - 1]) & (d <= bounds[k]), RING_VALUES[k], value
            )
        value = np.where(d <= r, 0.0, value)
        mask = np.minimum(mask, value)
    return mask
