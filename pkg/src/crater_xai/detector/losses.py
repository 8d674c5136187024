"""Detector losses: circular-prior CIoU plus weighted objectness BCE."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from ..errors import NumericalFailureError

LAMBDA_IOU = 0.05
LAMBDA_OBJ = 1.0
LAMBDA_NOOBJ = 0.5
SIZE_EPS = 1e-9
CONF_EPS = 1e-7


def box_iou_torch(pred, gt):
    """Elementwise IoU of (...,4) box tensors (cx, cy, w, h)."""
    px1 = pred[..., 0] - pred[..., 2] / 2
    py1 = pred[..., 1] - pred[..., 3] / 2
    px2 = pred[..., 0] + pred[..., 2] / 2
    py2 = pred[..., 1] + pred[..., 3] / 2
    gx1 = gt[..., 0] - gt[..., 2] / 2
    gy1 = gt[..., 1] - gt[..., 3] / 2
    gx2 = gt[..., 0] + gt[..., 2] / 2
    gy2 = gt[..., 1] + gt[..., 3] / 2
    iw = (torch.minimum(px2, gx2) - torch.maximum(px1, gx1)).clamp(min=0)
    ih = (torch.minimum(py2, gy2) - torch.maximum(py1, gy1)).clamp(min=0)
    inter = iw * ih
    union = pred[..., 2] * pred[..., 3] + gt[..., 2] * gt[..., 3] - inter
    return inter / union.clamp(min=SIZE_EPS)


def ciou_loss_term(pred, gt, alpha_override=None):
    """Complete-IoU term with the circular prior on the aspect penalty.

    pred, gt: (...,4) tensors (cx, cy, w, h); gt must have positive area.
    The aspect term compares the prediction's w/h against the square
    prior, so a square prediction incurs zero aspect penalty.  The
    trade-off factor alpha is treated as a constant during backprop;
    alpha_override fixes it explicitly (used by finite-difference checks).
    """
    pred = torch.as_tensor(pred)
    gt = torch.as_tensor(gt)
    w = pred[..., 2].clamp(min=SIZE_EPS)
    h = pred[..., 3].clamp(min=SIZE_EPS)
    iou_v = box_iou_torch(pred, gt)
    rho2 = (pred[..., 0] - gt[..., 0]) ** 2 + (pred[..., 1] - gt[..., 1]) ** 2
    cx1 = torch.minimum(pred[..., 0] - w / 2, gt[..., 0] - gt[..., 2] / 2)
    cy1 = torch.minimum(pred[..., 1] - h / 2, gt[..., 1] - gt[..., 3] / 2)
    cx2 = torch.maximum(pred[..., 0] + w / 2, gt[..., 0] + gt[..., 2] / 2)
    cy2 = torch.maximum(pred[..., 1] + h / 2, gt[..., 1] + gt[..., 3] / 2)
    c2 = ((cx2 - cx1) ** 2 + (cy2 - cy1) ** 2).clamp(min=SIZE_EPS)
    v = (4 / math.pi**2) * (math.atan(1.0) - torch.atan(w / h)) ** 2
    if alpha_override is None:
        with torch.no_grad():
            # v > 0 guarantees a positive denominator; v = 0 forces alpha*v = 0
            alpha = torch.where(v > 0, v / ((1 - iou_v) + v).clamp(min=SIZE_EPS),
                                torch.zeros_like(v))
    else:
        alpha = torch.as_tensor(alpha_override)
    return 1 - iou_v + rho2 / c2 + alpha * v


def objectness_loss(pred_conf, obj_mask, noobj_mask, lambda_noobj=LAMBDA_NOOBJ):
    """Binary cross-entropy over object and no-object cells, summed.

    pred_conf holds confidences in (0,1); cells flagged in neither mask
    are ignored.  Confidences are clamped before the log.
    """
    conf = torch.as_tensor(pred_conf).clamp(CONF_EPS, 1 - CONF_EPS)
    obj_mask = torch.as_tensor(obj_mask, dtype=torch.bool)
    noobj_mask = torch.as_tensor(noobj_mask, dtype=torch.bool)
    loss_obj = -torch.log(conf[obj_mask]).sum()
    loss_noobj = -torch.log(1 - conf[noobj_mask]).sum()
    return loss_obj + lambda_noobj * loss_noobj


@dataclass
class DetectorLossBreakdown:
    l_ciou: float
    l_obj: float

    @property
    def total(self) -> float:
        return LAMBDA_IOU * self.l_ciou + LAMBDA_OBJ * self.l_obj


def total_loss(pred_boxes, pred_conf, gt_boxes, obj_mask, noobj_mask,
               batch_id=None):
    """Weighted sum of the CIoU and objectness terms.

    pred_boxes/gt_boxes are (...,4) decoded boxes aligned with obj_mask;
    the CIoU term sums over positive cells only.  Returns
    (loss_tensor, DetectorLossBreakdown).
    """
    pred_boxes = torch.as_tensor(pred_boxes)
    if not torch.isfinite(pred_boxes).all() or not torch.isfinite(
        torch.as_tensor(pred_conf)
    ).all():
        raise NumericalFailureError(
            f"non-finite detector predictions (batch {batch_id})"
        )
    obj_mask_t = torch.as_tensor(obj_mask, dtype=torch.bool)
    if obj_mask_t.any():
        l_ciou = ciou_loss_term(pred_boxes[obj_mask_t], gt_boxes[obj_mask_t]).sum()
    else:
        l_ciou = pred_boxes.sum() * 0.0
    l_obj = objectness_loss(pred_conf, obj_mask, noobj_mask)
    loss = LAMBDA_IOU * l_ciou + LAMBDA_OBJ * l_obj
    return loss, DetectorLossBreakdown(float(l_ciou.detach()), float(l_obj.detach()))
