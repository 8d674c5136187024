"""Two-phase detector training: frozen backbone, then full fine-tune."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
import torch

from ..backbone import BackboneConfig, save_checkpoint
from ..errors import NumericalFailureError
from .anchors import kmeans_anchors
from .losses import total_loss
from .model import STRIDES, CraterDetector, build_targets


@dataclass
class DetectorSchedule:
    freeze_epochs: int = 2
    epochs: int = 20
    lr: float = 1e-4
    batch_size: int = 8
    seed: int = 0
    ignore_thresh: float = 0.5


def image_to_tensor(image: np.ndarray) -> torch.Tensor:
    """HxWx3 uint8 -> (3,H,W) float in [0,1]."""
    return torch.from_numpy(np.ascontiguousarray(image)).permute(2, 0, 1).float() / 255.0


def _loss_for_batch(model, batch_imgs, batch_targets, batch_id=None):
    raws, _ = model(batch_imgs)
    from .model import decode_raw  # local import avoids a cycle at module load

    groups = model.anchor_set.per_scale()
    loss = 0.0
    l_ciou = 0.0
    l_obj = 0.0
    for s, raw in enumerate(raws):
        boxes, conf = decode_raw(raw, groups[s], STRIDES[s])
        gt = torch.stack([t[s][0] for t in batch_targets])
        obj = torch.stack([t[s][1] for t in batch_targets])
        noobj = torch.stack([t[s][2] for t in batch_targets])
        l, breakdown = total_loss(boxes, conf, gt, obj, noobj, batch_id=batch_id)
        loss = loss + l
        l_ciou += breakdown.l_ciou
        l_obj += breakdown.l_obj
    n = batch_imgs.shape[0]
    return loss / n, l_ciou / n, l_obj / n


def train_detector(
    dataset: list,
    schedule: DetectorSchedule,
    model: CraterDetector = None,
    config: BackboneConfig = None,
    out_ckpt=None,
    fit_anchors: bool = True,
    callback=None,
):
    """Train on [(image_uint8, labels)] samples; returns (model, history).

    During the freeze phase the backbone parameters stay bit-identical
    (verified via param_hash by the tests).  Loss NaN aborts with the last
    good checkpoint restored.
    """
    torch.manual_seed(schedule.seed)
    if model is None:
        model = CraterDetector(config)
    all_labels = [lab for _, labels in dataset for lab in labels]
    if fit_anchors and len(all_labels) >= 9:
        model.set_anchors(kmeans_anchors(all_labels, seed=schedule.seed))

    imgs = [image_to_tensor(img) for img, _ in dataset]
    grid_shapes = [
        (imgs[0].shape[1] // s, imgs[0].shape[2] // s) for s in STRIDES
    ]
    targets = []
    for img, labels in dataset:
        raw_t = build_targets(
            labels, model.anchor_set, grid_shapes, img.shape[:2],
            ignore_thresh=schedule.ignore_thresh,
        )
        targets.append(
            [
                (torch.from_numpy(gt), torch.from_numpy(obj), torch.from_numpy(noobj))
                for gt, obj, noobj in raw_t
            ]
        )

    opt = torch.optim.Adam(model.parameters(), lr=schedule.lr)
    rng = np.random.default_rng(schedule.seed)
    history = []
    last_good = copy.deepcopy(model.state_dict())
    n = len(dataset)
    for epoch in range(schedule.epochs):
        frozen = epoch < schedule.freeze_epochs
        model.backbone.requires_grad_(not frozen)
        model.train()
        if frozen:
            model.backbone.eval()  # also freezes BN running statistics
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, schedule.batch_size):
            idx = order[start : start + schedule.batch_size]
            batch_imgs = torch.stack([imgs[i] for i in idx])
            batch_targets = [targets[i] for i in idx]
            try:
                loss, _, _ = _loss_for_batch(
                    model, batch_imgs, batch_targets, batch_id=f"{epoch}:{start}"
                )
            except NumericalFailureError:
                model.load_state_dict(last_good)
                if out_ckpt is not None:
                    save_checkpoint(model, out_ckpt, {"aborted_epoch": epoch})
                raise
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_loss += float(loss.detach()) * len(idx)
        history.append(epoch_loss / n)
        last_good = copy.deepcopy(model.state_dict())
        if callback is not None:
            callback(epoch, history[-1], model)
    if out_ckpt is not None:
        save_checkpoint(
            model,
            out_ckpt,
            {
                "kind": "detector",
                "config": vars(model.backbone.config),
                "schedule": vars(schedule),
                "history": history,
            },
        )
    return model, history
