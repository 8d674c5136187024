"""Detection and navigation evaluation: P/R/F1, AP, RMSE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detector.boxes import iou


@dataclass
class MatchResult:
    det_flags: list  # True = TP, False = FP, aligned with the input order
    gt_matched: list
    t_p: int
    f_p: int
    f_n: int


@dataclass
class PrCurve:
    """Operating points (recall, precision) by descending confidence."""

    recalls: np.ndarray
    precisions: np.ndarray


def match_detections(dets: list, gts: list, iou_thresh: float = 0.5) -> MatchResult:
    """Greedy confidence-ordered matching; each gt matches at most once.

    dets must be sorted by confidence descending; a detection is a TP iff
    its IoU with some still-unmatched gt reaches iou_thresh.
    """
    confs = [d.confidence for d in dets]
    if any(a < b for a, b in zip(confs, confs[1:])):
        raise ValueError("detections must be sorted by confidence descending")
    gt_matched = [False] * len(gts)
    det_flags = []
    for d in dets:
        best_iou, best_g = 0.0, -1
        for g, gt in enumerate(gts):
            if gt_matched[g]:
                continue
            v = iou((d.cx, d.cy, d.w, d.h), (gt.cx, gt.cy, gt.w, gt.h))
            if v > best_iou:
                best_iou, best_g = v, g
        if best_g >= 0 and best_iou >= iou_thresh:
            gt_matched[best_g] = True
            det_flags.append(True)
        else:
            det_flags.append(False)
    t_p = sum(det_flags)
    return MatchResult(det_flags, gt_matched, t_p, len(dets) - t_p,
                       len(gts) - sum(gt_matched))


def prf1(match: MatchResult):
    """(precision, recall, F1); components are None when undefined."""
    p = match.t_p / (match.t_p + match.f_p) if match.t_p + match.f_p > 0 else None
    r = match.t_p / (match.t_p + match.f_n) if match.t_p + match.f_n > 0 else None
    f1 = None
    if p is not None and r is not None and p + r > 0:
        f1 = 2 * p * r / (p + r)
    return p, r, f1


def pr_curve(det_flags, confidences, n_gt: int) -> PrCurve:
    """Operating points from per-detection TP flags and confidences."""
    order = np.argsort(-np.asarray(confidences, dtype=float), kind="stable")
    flags = np.asarray(det_flags)[order]
    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    precisions = tp / np.maximum(tp + fp, 1)
    recalls = tp / n_gt if n_gt > 0 else np.zeros_like(tp, dtype=float)
    return PrCurve(recalls, precisions)


def average_precision(curve: PrCurve) -> float:
    """Raw weighted-mean AP: sum over points of (R_n - R_{n-1}) P_n."""
    if len(curve.recalls) == 0:
        raise ValueError("AP of an empty curve is undefined")
    r_prev = 0.0
    ap = 0.0
    for r, p in zip(curve.recalls, curve.precisions):
        ap += (r - r_prev) * p
        r_prev = r
    return float(ap)


def ap_from_detections(dets_per_image: list, gts_per_image: list,
                       iou_thresh: float = 0.5) -> float:
    """Dataset-level AP: match per image, rank all detections globally."""
    flags, confs = [], []
    n_gt = 0
    for dets, gts in zip(dets_per_image, gts_per_image):
        match = match_detections(dets, gts, iou_thresh)
        flags.extend(match.det_flags)
        confs.extend(d.confidence for d in dets)
        n_gt += len(gts)
    if not flags:
        return 0.0
    return average_precision(pr_curve(flags, confs, n_gt))


def rmse(pred, gt) -> float:
    """Root-mean-square error of two equal-length series."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    if pred.size == 0:
        raise ValueError("rmse of empty series is undefined")
    return float(np.sqrt(np.mean((pred - gt) ** 2)))
