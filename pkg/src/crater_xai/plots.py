"""Figure rendering: detection overlays, mask mosaics, PCC bar charts."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

GT_STYLE = {"edgecolor": "red", "facecolor": "none", "linewidth": 1.2}
PRED_STYLE = {"edgecolor": "cyan", "facecolor": "none", "linewidth": 1.2,
              "linestyle": "--"}


def save_detection_overlay(image: np.ndarray, gt_labels, det_boxes, path):
    """Ground truth (solid red) vs predictions (dashed cyan) over the image."""
    fig, ax = plt.subplots(figsize=(4, 4), dpi=128)
    ax.imshow(image, cmap="gray")
    for lab in gt_labels:
        ax.add_patch(
            plt.Rectangle(
                (lab.center_px[0] - lab.radius_px, lab.center_px[1] - lab.radius_px),
                2 * lab.radius_px,
                2 * lab.radius_px,
                **GT_STYLE,
            )
        )
    for det in det_boxes:
        ax.add_patch(
            plt.Rectangle(
                (det.cx - det.w / 2, det.cy - det.h / 2), det.w, det.h, **PRED_STYLE
            )
        )
    ax.set_axis_off()
    fig.tight_layout(pad=0)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def save_mask_overlays(image: np.ndarray, masks: dict, out_dir):
    """One attention heatmap overlay PNG per layer."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for layer, mask in masks.items():
        fig, ax = plt.subplots(figsize=(4, 4), dpi=128)
        ax.imshow(image, cmap="gray")
        ax.imshow(
            np.asarray(mask), cmap="jet", alpha=0.45, vmin=0, vmax=1,
            extent=(0, image.shape[1], image.shape[0], 0),
        )
        ax.set_title(layer)
        ax.set_axis_off()
        fig.tight_layout(pad=0.2)
        fig.savefig(out / f"{layer}.png", metadata={"Software": None})
        plt.close(fig)


def save_mask_mosaic(masks: dict, path, ncols: int = 6):
    """Grid of raw attention masks, one tile per layer."""
    layers = sorted(masks)
    nrows = int(np.ceil(len(layers) / ncols))
    fig, axes = plt.subplots(nrows, ncols, figsize=(2 * ncols, 2 * nrows), dpi=100)
    axes = np.atleast_2d(axes)
    for ax in axes.ravel():
        ax.set_axis_off()
    for ax, layer in zip(axes.ravel(), layers):
        ax.imshow(np.asarray(masks[layer]), cmap="jet", vmin=0, vmax=1)
        ax.set_title(layer, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def save_pcc_bars(report, out_dir):
    """Grouped bar chart of the available PCC statistics per layer."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    layers = sorted(
        report.rows,
        key=lambda s: (int(s.split("_")[1][0]), int(s.split("_")[1][1:])),
    )
    metrics = [m for m in ("pcc1", "pcc2", "pcc3", "pcc4")
               if any(report.rows[l].get(m) is not None for l in layers)]
    if not metrics:
        return None
    x = np.arange(len(layers))
    width = 0.8 / len(metrics)
    fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(layers)), 4), dpi=120)
    for k, metric in enumerate(metrics):
        vals = [
            report.rows[l].get(metric)
            if report.rows[l].get(metric) is not None
            else 0.0
            for l in layers
        ]
        ax.bar(x + (k - (len(metrics) - 1) / 2) * width, vals, width, label=metric)
    ax.set_xticks(x)
    ax.set_xticklabels(layers, rotation=60, fontsize=7)
    ax.set_ylabel("Pearson correlation")
    ax.set_ylim(-1, 1)
    ax.axhline(0, color="k", linewidth=0.5)
    ax.legend()
    fig.tight_layout()
    path = out / "pcc_bars.png"
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path
