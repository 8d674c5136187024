"""Coarse-to-fine navigator training with cyclical learning-rate decay."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ..backbone import BackboneConfig, save_checkpoint
from ..errors import NumericalFailureError
from ..geometry import relative_pose
from .losses import FineLossWeights, coarse_loss, fine_loss
from .model import PoseNavigator, stack_pair


@dataclass
class NavigatorSchedule:
    coarse_epochs: int = 10
    fine_epochs: int = 20
    lr: float = 1e-4
    seq_len: int = 16
    batch_size: int = 8
    lr_cycles: int = 5
    kappa: float = 100.0
    seed: int = 0


def cyclical_lr(step: int, total_steps: int, n_cycles: int = 5,
                base_lr: float = 1e-4) -> float:
    """Cosine decay restarted n_cycles times, starting each cycle at base_lr."""
    if total_steps <= 0:
        return base_lr
    cycle_len = max(1, math.ceil(total_steps / n_cycles))
    t = (step % cycle_len) / cycle_len
    return base_lr * 0.5 * (1 + math.cos(math.pi * t))


def pairs_from_manifest(manifest, dataset_root, trajectory_indices=None):
    """Stacked-pair samples per trajectory: [(pair, gt_pos, gt_R), ...].

    Ground truth is the pose of frame t+1 expressed in the camera frame of
    frame t (pairwise relative pose).
    """
    root = Path(dataset_root)
    out = []
    for traj in manifest.trajectories:
        if trajectory_indices is not None and traj.index not in trajectory_indices:
            continue
        imgs = []
        for fr in traj.frames:
            arr = np.array(Image.open(root / fr.image_path).convert("RGB"))
            imgs.append(torch.from_numpy(arr).permute(2, 0, 1).float() / 255.0)
        samples = []
        for a, b in zip(traj.frames[:-1], traj.frames[1:]):
            rel = relative_pose(a.pose, b.pose, manifest.camera)
            pair = stack_pair(imgs[a.index - traj.frames[0].index],
                              imgs[b.index - traj.frames[0].index])
            samples.append(
                (
                    pair,
                    torch.tensor(rel.position, dtype=torch.float32),
                    torch.tensor(rel.matrix(), dtype=torch.float32),
                )
            )
        out.append(samples)
    return out


def _windows(trajectories, seq_len):
    wins = []
    for samples in trajectories:
        for start in range(0, max(1, len(samples) - seq_len + 1), seq_len):
            win = samples[start : start + seq_len]
            if win:
                wins.append(win)
    return wins


def _window_loss(model, window, stage, weights, kappa):
    pairs = torch.stack([p for p, _, _ in window])
    gt_pos = torch.stack([p for _, p, _ in window])
    gt_R = torch.stack([r for _, _, r in window])
    out9, _, _ = model.forward_sequence(pairs)
    if stage == "coarse":
        return coarse_loss(out9, gt_pos, gt_R, kappa=kappa)
    return fine_loss(out9, gt_pos, gt_R, weights)


def train_navigator(
    trajectories: list,
    schedule: NavigatorSchedule,
    model: PoseNavigator = None,
    config: BackboneConfig = None,
    backbone_state: dict = None,
    out_ckpt=None,
    callback=None,
):
    """Train on per-trajectory pair samples; returns (model, weights, history).

    trajectories: output of pairs_from_manifest.  backbone_state, when
    given, initialises the feature extractor (normally from a trained
    detector checkpoint); the coarse stage keeps it frozen, the fine stage
    updates everything including the homoscedastic loss weights.
    """
    torch.manual_seed(schedule.seed)
    if model is None:
        model = PoseNavigator(config)
    if backbone_state is not None:
        model.backbone.load_state_dict(backbone_state)
    weights = FineLossWeights()
    windows = _windows(trajectories, schedule.seq_len)
    rng = np.random.default_rng(schedule.seed)
    history = {"coarse": [], "fine": []}
    last_good = copy.deepcopy(model.state_dict())

    stages = [
        ("coarse", schedule.coarse_epochs),
        ("fine", schedule.fine_epochs),
    ]
    for stage, n_epochs in stages:
        if n_epochs <= 0:
            continue
        frozen = stage == "coarse"
        model.backbone.requires_grad_(not frozen)
        params = list(model.lstm.parameters()) + list(model.head.parameters())
        if not frozen:
            params += list(model.backbone.parameters()) + list(weights.parameters())
        opt = torch.optim.Adam(params, lr=schedule.lr)
        total_steps = n_epochs * max(1, len(windows))
        step = 0
        for epoch in range(n_epochs):
            model.train()
            if frozen:
                model.backbone.eval()
            order = rng.permutation(len(windows))
            epoch_loss = 0.0
            for wi in order:
                if stage == "fine":
                    lr = cyclical_lr(step, total_steps, schedule.lr_cycles,
                                     schedule.lr)
                    for g in opt.param_groups:
                        g["lr"] = lr
                loss = _window_loss(model, windows[wi], stage, weights,
                                    schedule.kappa)
                if not torch.isfinite(loss):
                    model.load_state_dict(last_good)
                    if out_ckpt is not None:
                        save_checkpoint(model, out_ckpt, {"aborted": stage})
                    raise NumericalFailureError(
                        f"navigator loss diverged during {stage} stage"
                    )
                opt.zero_grad()
                loss.backward()
                opt.step()
                epoch_loss += float(loss.detach())
                step += 1
            history[stage].append(epoch_loss / max(1, len(windows)))
            last_good = copy.deepcopy(model.state_dict())
            if callback is not None:
                callback(stage, epoch, history[stage][-1], model)
    if out_ckpt is not None:
        save_checkpoint(
            model,
            out_ckpt,
            {
                "kind": "navigator",
                "config": vars(model.backbone.config),
                "schedule": vars(schedule),
                "history": history,
                "sigma_p": float(weights.sigma_p.detach()),
                "sigma_phi": float(weights.sigma_phi.detach()),
            },
        )
    return model, weights, history
