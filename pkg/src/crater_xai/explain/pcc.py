"""Pearson-correlation explainability statistics over attention masks."""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np

from ..errors import UndefinedCorrelationError
from .warp import AffineWarp, warp_apply


def pearson(a, b) -> float:
    """Pearson correlation of two equal-length arrays (flattened)."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise ValueError("need at least two samples")
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt((da**2).sum())
    nb = np.sqrt((db**2).sum())
    if na == 0 or nb == 0:
        raise UndefinedCorrelationError("correlation of a constant input")
    return float(np.clip((da * db).sum() / (na * nb), -1.0, 1.0))


def pcc1(masks_per_layer: dict, ring_masks: list) -> dict:
    """Mean per-image correlation of each layer's mask with the ring mask.

    Returns {layer_id: (value_or_None, n_used)}; undefined correlations
    are excluded with the sample count adjusted.
    """
    out = {}
    for layer, masks in masks_per_layer.items():
        vals = []
        for mask, ring in zip(masks, ring_masks):
            try:
                vals.append(pearson(mask, ring))
            except UndefinedCorrelationError:
                continue
        out[layer] = (float(np.mean(vals)) if vals else None, len(vals))
    return out


def pcc2(masks_per_layer: dict, max_exhaustive: int = 32,
         n_sampled: int = 1000, seed: int = 0) -> dict:
    """Mean cross-input correlation of each layer's masks.

    All ordered pairs (n, m), m != n when the dataset has at most
    max_exhaustive images; otherwise n_sampled seeded uniform pairs.
    """
    out = {}
    for layer, masks in masks_per_layer.items():
        n = len(masks)
        if n < 2:
            out[layer] = (None, 0)
            continue
        if n <= max_exhaustive:
            pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
        else:
            rng = np.random.default_rng(seed)
            pairs = []
            while len(pairs) < n_sampled:
                i, j = rng.integers(0, n, size=2)
                if i != j:
                    pairs.append((int(i), int(j)))
        vals = []
        for i, j in pairs:
            try:
                vals.append(pearson(masks[i], masks[j]))
            except UndefinedCorrelationError:
                continue
        out[layer] = (float(np.mean(vals)) if vals else None, len(vals))
    return out


def split_stacked_mask(mask: np.ndarray, half_size: int = 256):
    """Resize a stacked-pair mask to (2*half, half) and split into halves."""
    resized = cv2.resize(
        np.asarray(mask, dtype=np.float64),
        (half_size, 2 * half_size),
        interpolation=cv2.INTER_LINEAR,
    )
    return resized[:half_size], resized[half_size:]


def pcc3_pcc4(masks_per_layer: dict, warps: list, half_size: int = 256,
              support_thresh: float = 0.999) -> dict:
    """Upper-vs-lower half correlations, raw (pcc3) and pose-warped (pcc4).

    masks come from 512-tall stacked-pair inputs; warps[i] is the
    AffineWarp of sample i mapping the lower (later) frame into the upper
    frame's pixel coordinates.  Warped-in regions without source pixels
    are excluded from the correlation support; under an identity warp the
    two statistics are computed on an identical path and agree exactly.
    Returns {layer_id: (pcc3, pcc4, n3, n4)}.
    """
    out = {}
    for layer, masks in masks_per_layer.items():
        v3, v4 = [], []
        for mask, warp in zip(masks, warps):
            upper, lower = split_stacked_mask(mask, half_size)
            identity = AffineWarp(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
            for target, accum in ((identity, v3), (warp, v4)):
                warped, support = warp_apply(lower, target)
                valid = support >= support_thresh
                if valid.sum() < 2:
                    continue
                try:
                    accum.append(pearson(upper[valid], warped[valid]))
                except UndefinedCorrelationError:
                    continue
        out[layer] = (
            float(np.mean(v3)) if v3 else None,
            float(np.mean(v4)) if v4 else None,
            len(v3),
            len(v4),
        )
    return out


@dataclass
class PccReport:
    """Per-layer PCC values with sample counts."""

    rows: dict = field(default_factory=dict)  # layer_id -> dict of stats

    def layer_ids(self):
        return list(self.rows)

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["layer_id", "pcc1", "pcc2", "pcc3", "pcc4", "N"])
            for layer in sorted(self.rows):
                row = self.rows[layer]
                fmt = lambda v: "" if v is None else "%.10f" % v
                wr.writerow(
                    [
                        layer,
                        fmt(row.get("pcc1")),
                        fmt(row.get("pcc2")),
                        fmt(row.get("pcc3")),
                        fmt(row.get("pcc4")),
                        row.get("n", 0),
                    ]
                )

    @classmethod
    def from_csv(cls, path) -> "PccReport":
        import csv

        rows = {}
        with open(path, newline="") as f:
            for rec in csv.DictReader(f):
                rows[rec["layer_id"]] = {
                    key: (float(rec[key]) if rec[key] else None)
                    for key in ("pcc1", "pcc2", "pcc3", "pcc4")
                }
                rows[rec["layer_id"]]["n"] = int(rec["N"])
        return cls(rows)
