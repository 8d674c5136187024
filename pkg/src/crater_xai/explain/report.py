"""End-to-end explainability report over a dataset and trained checkpoints."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ..backbone import extract_attention, load_checkpoint, BackboneConfig
from ..detector.model import CraterDetector
from ..geometry import relative_pose
from ..navigator.model import PoseNavigator, stack_pair
from .masks import ring_mask
from .pcc import PccReport, pcc1, pcc2, pcc3_pcc4
from .warp import affine_from_pose, ground_plane_in_camera


def _load_image(root, rel):
    arr = np.array(Image.open(Path(root) / rel).convert("RGB"))
    return torch.from_numpy(arr).permute(2, 0, 1).float() / 255.0


def _config_from_meta(meta):
    cfg = meta.get("config")
    if cfg is None:
        return None
    cfg = dict(cfg)
    cfg["stage_units"] = tuple(cfg["stage_units"])
    cfg["stage_channels"] = tuple(cfg["stage_channels"])
    return BackboneConfig(**cfg)


def detector_masks(model, images, target_size=(256, 256)):
    """Resized spatial attention masks per layer for a list of images."""
    model.eval()
    per_layer = {}
    with torch.no_grad():
        for img in images:
            out = model.backbone(img[None])
            for layer in out.masks.layer_ids():
                mask = extract_attention(out.masks, layer, target_size)
                per_layer.setdefault(layer, []).append(mask.numpy())
    return per_layer


def build_report(
    manifest,
    dataset_root,
    detector_ckpt,
    navigator_ckpt=None,
    out_dir=None,
    max_images: int = 24,
    seed: int = 0,
) -> PccReport:
    """Compute PCC1/PCC2 (detector) and PCC3/PCC4 (navigator) per layer.

    Writes pcc.csv, per-layer overlay PNGs, and bar charts under out_dir
    when given.  Deterministic for fixed seed and checkpoints.
    """
    frames = [
        (traj, frame)
        for traj in manifest.trajectories
        for frame in traj.frames
    ]
    rng = np.random.default_rng(seed)
    if len(frames) > max_images:
        idx = sorted(rng.choice(len(frames), size=max_images, replace=False))
        frames = [frames[i] for i in idx]

    ckpt = load_checkpoint(detector_ckpt)
    det = CraterDetector(_config_from_meta(ckpt["meta"]))
    det.load_state_dict(ckpt["state_dict"])
    images = [_load_image(dataset_root, fr.image_path) for _, fr in frames]
    rings = [ring_mask(fr.labels) for _, fr in frames]
    masks_det = detector_masks(det, images)
    stats1 = pcc1(masks_det, rings)
    stats2 = pcc2(masks_det, seed=seed)

    stats34 = {}
    if navigator_ckpt is not None:
        nav_ckpt = load_checkpoint(navigator_ckpt)
        nav = PoseNavigator(_config_from_meta(nav_ckpt["meta"]))
        nav.load_state_dict(nav_ckpt["state_dict"])
        nav.eval()
        masks_nav = {}
        warps = []
        pair_budget = max_images
        with torch.no_grad():
            for traj in manifest.trajectories:
                for a, b in zip(traj.frames[:-1], traj.frames[1:]):
                    if pair_budget <= 0:
                        break
                    pair = stack_pair(
                        _load_image(dataset_root, a.image_path),
                        _load_image(dataset_root, b.image_path),
                    )
                    out = nav.backbone(pair[None])
                    for layer in out.masks.layer_ids():
                        masks_nav.setdefault(layer, []).append(
                            out.masks[layer][0].numpy()
                        )
                    rel = relative_pose(a.pose, b.pose, manifest.camera)
                    plane = ground_plane_in_camera(a.pose, manifest.camera)
                    warps.append(affine_from_pose(rel, manifest.camera, plane))
                    pair_budget -= 1
        stats34 = pcc3_pcc4(masks_nav, warps)

    layer_ids = sorted(
        set(stats1) | set(stats34),
        key=lambda s: (int(s.split("_")[1][0]), int(s.split("_")[1][1:])),
    )
    rows = {}
    for layer in layer_ids:
        row = {"pcc1": None, "pcc2": None, "pcc3": None, "pcc4": None, "n": 0}
        if layer in stats1:
            row["pcc1"], row["n"] = stats1[layer]
        if layer in stats2:
            row["pcc2"] = stats2[layer][0]
        if layer in stats34:
            row["pcc3"], row["pcc4"], n3, _ = stats34[layer]
            row["n"] = max(row["n"], n3)
        rows[layer] = row
    report = PccReport(rows)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.to_csv(out / "pcc.csv")
        from ..plots import save_mask_overlays, save_pcc_bars

        first_img = (images[0].permute(1, 2, 0).numpy() * 255).astype(np.uint8)
        overlays = {layer: masks_det[layer][0] for layer in masks_det}
        np.savez(out / "masks.npz", **overlays)
        save_mask_overlays(first_img, overlays, out / "masks")
        save_pcc_bars(report, out)
    return report
