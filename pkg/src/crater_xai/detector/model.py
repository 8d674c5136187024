"""Multi-scale crater detection heads over the attention backbone."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from ..backbone import AttentionDarknet, BackboneConfig, ConvBNLeaky
from .anchors import AnchorSet
from .boxes import DetectionBox, nms

STRIDES = (8, 16, 32)  # heads read the last three backbone stages

DEFAULT_ANCHORS = np.array(
    [[6, 6], [10, 10], [16, 16], [24, 24], [34, 34], [46, 46], [60, 60], [80, 80], [100, 100]],
    dtype=float,
)


class CraterDetector(nn.Module):
    """Attention backbone + three single-class YOLO-style heads."""

    def __init__(self, config: BackboneConfig = None, anchors: AnchorSet = None):
        super().__init__()
        self.backbone = AttentionDarknet(config)
        cfg = self.backbone.config
        route_channels = cfg.stage_channels[-3:]
        for s, c in enumerate(route_channels, 1):
            setattr(
                self,
                f"head{s}",
                nn.Sequential(ConvBNLeaky(c, 2 * c, 3), nn.Conv2d(2 * c, 3 * 5, 1)),
            )
        a = anchors.anchors if anchors is not None else DEFAULT_ANCHORS
        self.register_buffer("anchors", torch.as_tensor(a, dtype=torch.float32))

    @property
    def anchor_set(self) -> AnchorSet:
        return AnchorSet(self.anchors.detach().cpu().numpy())

    def set_anchors(self, anchors: AnchorSet):
        self.anchors.copy_(torch.as_tensor(anchors.anchors, dtype=self.anchors.dtype))

    def forward(self, x):
        """Returns (raw head outputs per scale, AttentionMaskSet).

        Each raw output has shape (N, 3, 5, Hs, Ws): 3 anchors with
        (tx, ty, tw, th, tobj) channels.
        """
        out = self.backbone(x)
        n_stages = len(self.backbone.config.stage_units)
        raws = []
        for s in range(1, 4):
            feat = out.routes[f"s{n_stages - 3 + s}"]
            raw = getattr(self, f"head{s}")(feat)
            n, _, hh, ww = raw.shape
            raws.append(raw.view(n, 3, 5, hh, ww))
        return raws, out.masks


def decode_raw(raw, anchors_scale, stride):
    """Decode one scale's raw output into pixel boxes and confidences.

    raw: (N,3,5,H,W); anchors_scale: (3,2) pixel anchors.
    Returns boxes (N,3,H,W,4) as (cx,cy,w,h) and conf (N,3,H,W).
    """
    n, na, _, h, w = raw.shape
    device = raw.device
    gy, gx = torch.meshgrid(
        torch.arange(h, device=device, dtype=raw.dtype),
        torch.arange(w, device=device, dtype=raw.dtype),
        indexing="ij",
    )
    anchors_t = torch.as_tensor(anchors_scale, dtype=raw.dtype, device=device)
    bx = (torch.sigmoid(raw[:, :, 0]) + gx) * stride
    by = (torch.sigmoid(raw[:, :, 1]) + gy) * stride
    bw = anchors_t[None, :, 0, None, None] * torch.exp(raw[:, :, 2].clamp(-10, 10))
    bh = anchors_t[None, :, 1, None, None] * torch.exp(raw[:, :, 3].clamp(-10, 10))
    conf = torch.sigmoid(raw[:, :, 4])
    return torch.stack([bx, by, bw, bh], dim=-1), conf


def decode_and_nms(raws, anchor_set: AnchorSet, conf_thresh: float = 0.5,
                   nms_iou_thresh: float = 0.45) -> list:
    """Decode all scales of a single image and apply NMS.

    Returns DetectionBox list sorted by confidence descending.
    """
    if not (0 < conf_thresh < 1 and 0 < nms_iou_thresh < 1):
        raise ValueError("thresholds must lie in (0,1)")
    groups = anchor_set.per_scale()
    cands = []
    for raw, anchors_scale, stride in zip(raws, groups, STRIDES):
        boxes, conf = decode_raw(raw.detach(), anchors_scale, stride)
        keep = conf[0] >= conf_thresh
        for b, c in zip(boxes[0][keep].cpu().numpy(), conf[0][keep].cpu().numpy()):
            cands.append(DetectionBox(*[float(v) for v in b], float(c)))
    return nms(cands, nms_iou_thresh)


def build_targets(labels, anchor_set: AnchorSet, grid_shapes, img_size,
                  ignore_thresh: float = 0.5):
    """Anchor/cell assignment for one image.

    Best shape-IoU anchor per ground truth is positive; non-best anchors
    above ignore_thresh at the same cell are ignored.  Returns per scale
    (gt_boxes (3,H,W,4), obj_mask, noobj_mask).
    """
    anchors = anchor_set.anchors
    out = []
    for (h, w) in grid_shapes:
        out.append(
            (
                np.zeros((3, h, w, 4), dtype=np.float32),
                np.zeros((3, h, w), dtype=bool),
                np.ones((3, h, w), dtype=bool),
            )
        )
    for lab in labels:
        d = 2 * lab.radius_px
        inter = np.minimum(d, anchors[:, 0]) * np.minimum(d, anchors[:, 1])
        union = d * d + anchors[:, 0] * anchors[:, 1] - inter
        shape_iou = inter / union
        best = int(np.argmax(shape_iou))
        for k in range(len(anchors)):
            s, a = divmod(k, 3)
            stride = STRIDES[s]
            gt_boxes, obj, noobj = out[s]
            h, w = gt_boxes.shape[1:3]
            j = min(int(lab.center_px[0] / stride), w - 1)
            i = min(int(lab.center_px[1] / stride), h - 1)
            if k == best:
                obj[a, i, j] = True
                noobj[a, i, j] = False
                gt_boxes[a, i, j] = [lab.center_px[0], lab.center_px[1], d, d]
            elif shape_iou[k] > ignore_thresh:
                noobj[a, i, j] = False
    return out
