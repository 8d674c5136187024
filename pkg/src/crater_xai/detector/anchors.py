"""Adaptive anchors via k-means with a 1-IoU shape distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AnchorSet:
    """Nine (w,h) anchor pairs in pixels, sorted ascending by area."""

    anchors: np.ndarray

    def __post_init__(self):
        self.anchors = np.asarray(self.anchors, dtype=float).reshape(-1, 2)
        if np.any(self.anchors <= 0):
            raise ValueError("anchors must be positive")
        areas = self.anchors[:, 0] * self.anchors[:, 1]
        if np.any(np.diff(areas) < 0):
            raise ValueError("anchors must be sorted ascending by area")

    def per_scale(self, n_scales: int = 3) -> list:
        """Split into n_scales groups, smallest areas first."""
        per = len(self.anchors) // n_scales
        return [self.anchors[i * per : (i + 1) * per] for i in range(n_scales)]


def _shape_iou(wh, centroids):
    """IoU between concentric boxes given only their (w,h)."""
    inter = np.minimum(wh[:, None, 0], centroids[None, :, 0]) * np.minimum(
        wh[:, None, 1], centroids[None, :, 1]
    )
    union = (
        wh[:, None, 0] * wh[:, None, 1]
        + centroids[None, :, 0] * centroids[None, :, 1]
        - inter
    )
    return inter / union


def kmeans_anchors(labels: list, k: int = 9, seed: int = 0,
                   max_iter: int = 300) -> AnchorSet:
    """Cluster label boxes (w=h=2r) into k anchors, deterministic in seed."""
    if len(labels) < k:
        raise ValueError(f"need at least {k} labels, got {len(labels)}")
    wh = np.array([[2 * lab.radius_px, 2 * lab.radius_px] for lab in labels])
    rng = np.random.default_rng(seed)
    uniq = np.unique(wh, axis=0)
    if len(uniq) >= k:
        centroids = uniq[rng.choice(len(uniq), size=k, replace=False)].astype(float)
    else:
        centroids = wh[rng.choice(len(wh), size=k, replace=True)].astype(float)
    assign = np.full(len(wh), -1)
    for _ in range(max_iter):
        new_assign = np.argmax(_shape_iou(wh, centroids), axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            members = wh[assign == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    order = np.argsort(centroids[:, 0] * centroids[:, 1], kind="stable")
    return AnchorSet(centroids[order])
