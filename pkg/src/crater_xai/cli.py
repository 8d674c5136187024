"""Command-line surface: dataset generation, training, evaluation, reports.

Exit codes: 0 success, 2 config error, 3 missing prerequisite,
4 numerical failure.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from pathlib import Path

import click
import numpy as np
import torch

from .backbone import BackboneConfig, load_checkpoint
from .config import RunConfig, RunRecord, file_hash, split_indices
from .errors import (
    ConfigError,
    MissingPrerequisiteError,
    NumericalFailureError,
)
from .geometry import quat_to_matrix
from .metrics import ap_from_detections, match_detections, prf1, rmse
from .scenesim import CraterLabel2D, generate_dataset, read_dataset

FLOAT_FMT = "%.6f"


def _backbone_config(tiny: bool) -> BackboneConfig:
    return BackboneConfig.tiny() if tiny else BackboneConfig()


def _require(path, hint):
    if path is None or not Path(path).exists():
        raise MissingPrerequisiteError(
            f"missing prerequisite: {path}; produce it with `{hint}`"
        )
    return Path(path)


def _prepare_out(out_dir, force):
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        raise ConfigError(
            f"output directory {out} is not empty; pass --force to overwrite"
        )
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_manifest(data_dir):
    _require(Path(data_dir) / "manifest.json", "crater-xai gen --out " + str(data_dir))
    return read_dataset(data_dir)


@click.group()
def cli():
    """Explainable crater detection and lunar landing navigation."""


@cli.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--trajectories", type=int, default=None)
@click.option("--frames", type=int, default=None)
@click.option("--force", is_flag=True)
@click.option(
    "--paper-scale",
    is_flag=True,
    help="343 trajectories x 100 frames; NOT desk-reproducible in practice "
    "(hours of rendering) but provided for completeness.",
)
def gen(out_dir, config_path, seed, trajectories, frames, force, paper_scale):
    """Generate a seeded synthetic landing dataset."""
    cfg = RunConfig.load(
        config_path,
        {
            "seed": seed,
            "dataset.n_trajectories": trajectories,
            "dataset.n_frames": frames,
        },
    )
    if paper_scale:
        click.echo(
            "warning: paper-scale generation (343x100) is not desk-reproducible; "
            "expect a very long run",
            err=True,
        )
        cfg.dataset.n_trajectories = 343
        cfg.dataset.n_frames = 100
    out = _prepare_out(out_dir, force)
    record = RunRecord("gen", cfg.content_hash(), {}, time.time())
    d = cfg.dataset
    generate_dataset(
        out,
        seed=cfg.seed,
        n_trajectories=d.n_trajectories,
        n_frames=d.n_frames,
        area_m=d.area_m,
        crater_count=d.crater_count,
        noise_sigma=d.noise_sigma,
        att_sigma_deg=d.att_sigma_deg,
        start_alt_m=d.start_alt_m,
        end_alt_m=d.end_alt_m,
    )
    meta = json.loads((out / "manifest.json").read_text())
    meta["config_hash"] = cfg.content_hash()
    (out / "manifest.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    record.artifacts = [str(out / "manifest.json")]
    record.write(out / "run_record.json")
    click.echo(f"dataset written to {out}")


def _flatten_samples(manifest, data_dir):
    from PIL import Image

    samples = []
    for traj in manifest.trajectories:
        for fr in traj.frames:
            img = np.array(Image.open(Path(data_dir) / fr.image_path).convert("RGB"))
            samples.append((img, fr.labels))
    return samples


@cli.command("train-detect")
@click.option("--data", "data_dir", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--tiny", is_flag=True)
@click.option("--freeze-epochs", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--force", is_flag=True)
def train_detect(data_dir, out_dir, config_path, seed, tiny, freeze_epochs,
                 epochs, lr, force):
    """Train the crater detector (frozen backbone phase, then fine-tune)."""
    from .detector import DetectorSchedule, train_detector

    cfg = RunConfig.load(
        config_path,
        {
            "seed": seed,
            "tiny": tiny or None,
            "detector.freeze_epochs": freeze_epochs,
            "detector.epochs": epochs,
            "detector.lr": lr,
        },
    )
    manifest = _load_manifest(data_dir)
    out = _prepare_out(out_dir, force)
    record = RunRecord(
        "train-detect",
        cfg.content_hash(),
        {"manifest": file_hash(Path(data_dir) / "manifest.json")},
        time.time(),
    )
    samples = _flatten_samples(manifest, data_dir)
    # detector split is by image: frames are shuffled individually
    train_idx, val_idx, _test_idx = split_indices(len(samples), seed=cfg.seed)
    schedule = DetectorSchedule(
        freeze_epochs=cfg.detector.freeze_epochs,
        epochs=cfg.detector.epochs,
        lr=cfg.detector.lr,
        batch_size=cfg.detector.batch_size,
        seed=cfg.seed,
    )
    ckpt = out / "detector.ckpt"
    model, history = train_detector(
        [samples[i] for i in train_idx],
        schedule,
        config=_backbone_config(cfg.tiny),
        out_ckpt=ckpt,
    )
    metrics = _detector_metrics(model, [samples[i] for i in val_idx])
    _write_json(out / "metrics.json", metrics)
    record.artifacts = [str(ckpt), str(out / "metrics.json")]
    record.write(out / "run_record.json")
    click.echo(f"checkpoint: {ckpt}")
    click.echo(json.dumps(metrics, sort_keys=True))


def _detector_metrics(model, samples, conf_thresh=0.5, nms_iou=0.45):
    from .detector import decode_and_nms
    from .detector.train import image_to_tensor

    model.eval()
    dets_all, gts_all = [], []
    with torch.no_grad():
        for img, labels in samples:
            raws, _ = model(image_to_tensor(img)[None])
            dets = decode_and_nms(raws, model.anchor_set, conf_thresh, nms_iou)
            dets_all.append(dets)
            gts_all.append(_labels_to_boxes(labels))
    flags, confs, n_gt = [], [], 0
    t_p = f_p = f_n = 0
    for dets, gts in zip(dets_all, gts_all):
        m = match_detections(dets, gts, 0.5)
        t_p += m.t_p
        f_p += m.f_p
        f_n += m.f_n
        n_gt += len(gts)
    from .metrics import MatchResult

    p, r, f1 = prf1(MatchResult([], [], t_p, f_p, f_n))
    ap = ap_from_detections(dets_all, gts_all) if n_gt else 0.0
    return {
        "precision": p,
        "recall": r,
        "f1": f1,
        "ap": ap,
        "n_images": len(samples),
        "n_gt": n_gt,
    }


def _labels_to_boxes(labels):
    from .detector.boxes import DetectionBox

    return [
        DetectionBox(l.center_px[0], l.center_px[1], 2 * l.radius_px,
                     2 * l.radius_px, 1.0)
        for l in labels
    ]


@cli.command()
@click.option("--ckpt", required=True, type=click.Path())
@click.option("--image", "image_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--conf-thresh", type=float, default=0.5)
@click.option("--nms-iou", type=float, default=0.45)
def detect(ckpt, image_path, out_dir, conf_thresh, nms_iou):
    """Detect craters in one image; writes an overlay and a CSV dump."""
    from PIL import Image

    from .detector import decode_and_nms
    from .detector.model import CraterDetector
    from .detector.train import image_to_tensor
    from .plots import save_detection_overlay

    _require(ckpt, "crater-xai train-detect")
    payload = load_checkpoint(ckpt)
    from .explain.report import _config_from_meta

    model = CraterDetector(_config_from_meta(payload["meta"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    img = np.array(Image.open(image_path).convert("RGB"))
    with torch.no_grad():
        raws, _ = model(image_to_tensor(img)[None])
    dets = decode_and_nms(raws, model.anchor_set, conf_thresh, nms_iou)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(image_path).stem
    with open(out / "detections.csv", "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["frame", "cx", "cy", "w", "h", "conf"])
        for d in dets:
            wr.writerow(
                [stem] + [FLOAT_FMT % v for v in (d.cx, d.cy, d.w, d.h, d.confidence)]
            )
    save_detection_overlay(img, [], dets, out / f"{stem}_overlay.png")
    click.echo(f"{len(dets)} detections -> {out / 'detections.csv'}")


@cli.command("train-nav")
@click.option("--data", "data_dir", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--backbone-ckpt", type=click.Path(), default=None)
@click.option("--random-init", is_flag=True,
              help="Start from a randomly initialised backbone.")
@click.option("--stage", type=click.Choice(["coarse", "fine", "both"]),
              default="both")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--tiny", is_flag=True)
@click.option("--coarse-epochs", type=int, default=None)
@click.option("--fine-epochs", type=int, default=None)
@click.option("--force", is_flag=True)
def train_nav(data_dir, out_dir, backbone_ckpt, random_init, stage, config_path,
              seed, tiny, coarse_epochs, fine_epochs, force):
    """Train the relative-pose navigator (coarse stage, then fine stage)."""
    from .navigator import NavigatorSchedule, train_navigator
    from .navigator.train import pairs_from_manifest

    cfg = RunConfig.load(
        config_path,
        {
            "seed": seed,
            "tiny": tiny or None,
            "navigator.coarse_epochs": coarse_epochs,
            "navigator.fine_epochs": fine_epochs,
        },
    )
    backbone_state = None
    if not random_init:
        if backbone_ckpt is None:
            raise MissingPrerequisiteError(
                "train-nav needs --backbone-ckpt (a detector checkpoint from "
                "`crater-xai train-detect`) or the explicit --random-init flag"
            )
        payload = load_checkpoint(_require(backbone_ckpt, "crater-xai train-detect"))
        backbone_state = {
            k[len("backbone.") :]: v
            for k, v in payload["state_dict"].items()
            if k.startswith("backbone.")
        }
    manifest = _load_manifest(data_dir)
    out = _prepare_out(out_dir, force)
    record = RunRecord(
        "train-nav",
        cfg.content_hash(),
        {"manifest": file_hash(Path(data_dir) / "manifest.json")},
        time.time(),
    )
    # navigator split is by trajectory: frames within one are correlated
    n_traj = len(manifest.trajectories)
    train_idx, val_idx, _ = split_indices(n_traj, seed=cfg.seed)
    traj_ids = [manifest.trajectories[i].index for i in train_idx]
    trajectories = pairs_from_manifest(manifest, data_dir, traj_ids)
    nav = cfg.navigator
    schedule = NavigatorSchedule(
        coarse_epochs=nav.coarse_epochs if stage in ("coarse", "both") else 0,
        fine_epochs=nav.fine_epochs if stage in ("fine", "both") else 0,
        lr=nav.lr,
        seq_len=nav.seq_len,
        batch_size=nav.batch_size,
        lr_cycles=nav.lr_cycles,
        kappa=nav.kappa,
        seed=cfg.seed,
    )
    ckpt = out / "navigator.ckpt"
    model, _weights, history = train_navigator(
        trajectories,
        schedule,
        config=_backbone_config(cfg.tiny),
        backbone_state=backbone_state,
        out_ckpt=ckpt,
    )
    val_ids = [manifest.trajectories[i].index for i in val_idx] or traj_ids[:1]
    val_trajs = pairs_from_manifest(manifest, data_dir, val_ids)
    metrics = _navigator_metrics(model, val_trajs)
    _write_json(out / "metrics.json", metrics)
    record.artifacts = [str(ckpt), str(out / "metrics.json")]
    record.write(out / "run_record.json")
    click.echo(f"checkpoint: {ckpt}")
    click.echo(json.dumps(metrics, sort_keys=True))


def _navigator_metrics(model, trajectories):
    from .navigator.model import split_pose9
    from .navigator.rotation6d import (
        euler_zyx_from_matrix_t,
        rot6d_to_matrix,
        wrap_angle_t,
    )

    model.eval()
    pred_pos, gt_pos, ang_err = [], [], []
    with torch.no_grad():
        for samples in trajectories:
            if not samples:
                continue
            pairs = torch.stack([p for p, _, _ in samples])
            out9, _, _ = model.forward_sequence(pairs)
            pos, r6 = split_pose9(out9)
            pred_pos.append(pos.numpy())
            gt_pos.append(torch.stack([p for _, p, _ in samples]).numpy())
            pe = euler_zyx_from_matrix_t(rot6d_to_matrix(r6))
            ge = euler_zyx_from_matrix_t(torch.stack([r for _, _, r in samples]))
            ang_err.append(wrap_angle_t(pe - ge).numpy())
    pred = np.concatenate(pred_pos)
    gt = np.concatenate(gt_pos)
    ang = np.degrees(np.concatenate(ang_err))
    return {
        "pos_rmse_m": rmse(pred, gt),
        "ori_rmse_deg": float(np.sqrt(np.mean(ang**2))),
        "n_pairs": int(len(pred)),
    }


@cli.command()
@click.option("--ckpt", required=True, type=click.Path())
@click.option("--traj", "traj_dir", required=True, type=click.Path(),
              help="A traj_<k> subdirectory of a generated dataset.")
@click.option("--out", "out_path", required=True, type=click.Path())
def estimate(ckpt, traj_dir, out_path):
    """Run the navigator along one trajectory; writes frame,px,py,pz,r1..r6."""
    from .navigator.model import PoseNavigator
    from .navigator.train import pairs_from_manifest
    from .explain.report import _config_from_meta

    _require(ckpt, "crater-xai train-nav")
    traj_path = Path(traj_dir)
    manifest = _load_manifest(traj_path.parent)
    k = int(traj_path.name.split("_")[-1])
    payload = load_checkpoint(ckpt)
    model = PoseNavigator(_config_from_meta(payload["meta"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    trajs = pairs_from_manifest(manifest, traj_path.parent, [k])
    samples = trajs[0]
    hidden = None
    rows = []
    with torch.no_grad():
        for i, (pair, _, _) in enumerate(samples):
            out9, hidden, _ = model.forward_sequence(pair[None], hidden)
            rows.append([i] + [FLOAT_FMT % v for v in out9[0].tolist()])
    with open(out_path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["frame", "px", "py", "pz", "r1", "r2", "r3", "r4", "r5", "r6"])
        wr.writerows(rows)
    click.echo(f"{len(rows)} pose estimates -> {out_path}")


def _read_pose_csv(path):
    """Read either relative r1..r6 estimates or absolute quaternion poses."""
    with open(path, newline="") as f:
        recs = list(csv.DictReader(f))
    if not recs:
        raise ConfigError(f"empty pose file: {path}")
    if "r1" in recs[0]:
        pos = np.array([[float(r[k]) for k in ("px", "py", "pz")] for r in recs])
        r6 = np.array([[float(r[f"r{i}"]) for i in range(1, 7)] for r in recs])
        from .navigator.rotation6d import rot6d_to_matrix

        R = rot6d_to_matrix(torch.tensor(r6)).numpy()
        return pos, R, "relative"
    pos = np.array([[float(r[k]) for k in ("px", "py", "pz")] for r in recs])
    quats = np.array(
        [[float(r[k]) for k in ("qw", "qx", "qy", "qz")] for r in recs]
    )
    R = np.stack([quat_to_matrix(q / np.linalg.norm(q)) for q in quats])
    return pos, R, "absolute"


@cli.command("eval-detect")
@click.option("--pred", "pred_csv", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_csv", required=True, type=click.Path(exists=True))
@click.option("--iou-thresh", type=float, default=0.5)
@click.option("--out", "out_path", type=click.Path(), default=None)
def eval_detect(pred_csv, gt_csv, iou_thresh, out_path):
    """Evaluate a detection dump against labels; prints JSON P/R/F1/AP."""
    from .detector.boxes import DetectionBox

    def key(s):
        # labels.csv uses bare indices, detect dumps use image stems
        return s[len("frame_"):] if s.startswith("frame_") else s

    preds, gts = {}, {}
    with open(pred_csv, newline="") as f:
        for r in csv.DictReader(f):
            preds.setdefault(key(r["frame"]), []).append(
                DetectionBox(float(r["cx"]), float(r["cy"]), float(r["w"]),
                             float(r["h"]), float(r["conf"]))
            )
    with open(gt_csv, newline="") as f:
        for r in csv.DictReader(f):
            lab = CraterLabel2D([float(r["cx_px"]), float(r["cy_px"])],
                                float(r["r_px"]))
            gts.setdefault(key(r["frame"]), []).append(lab)
    frames = sorted(set(preds) | set(gts))
    dets_all = [sorted(preds.get(k, []), key=lambda d: -d.confidence) for k in frames]
    gts_all = [_labels_to_boxes(gts.get(k, [])) for k in frames]
    t_p = f_p = f_n = 0
    for dets, g in zip(dets_all, gts_all):
        m = match_detections(dets, g, iou_thresh)
        t_p, f_p, f_n = t_p + m.t_p, f_p + m.f_p, f_n + m.f_n
    from .metrics import MatchResult

    p, r, f1 = prf1(MatchResult([], [], t_p, f_p, f_n))
    payload = {
        "precision": p,
        "recall": r,
        "f1": f1,
        "ap": ap_from_detections(dets_all, gts_all, iou_thresh),
    }
    if out_path:
        _write_json(out_path, payload)
    click.echo(json.dumps(payload, sort_keys=True))


@cli.command("eval-nav")
@click.option("--pred", "pred_csv", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_csv", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None)
def eval_nav(pred_csv, gt_csv, out_path):
    """Pose RMSE of predicted vs ground-truth relative poses (JSON)."""
    from .geometry import euler_zyx_from_matrix, wrap_angle

    p_pos, p_R, p_kind = _read_pose_csv(pred_csv)
    g_pos, g_R, g_kind = _read_pose_csv(gt_csv)
    if g_kind == "absolute":
        # nadir body_to_camera is identity; pairwise relative poses
        rel_pos = np.stack(
            [g_R[i] @ (g_pos[i + 1] - g_pos[i]) for i in range(len(g_pos) - 1)]
        )
        rel_R = np.stack(
            [g_R[i + 1] @ g_R[i].T for i in range(len(g_pos) - 1)]
        )
        g_pos, g_R = rel_pos, rel_R
    n = min(len(p_pos), len(g_pos))
    if n == 0:
        raise ConfigError("no overlapping pose samples to compare")
    p_e = np.stack([euler_zyx_from_matrix(R) for R in p_R[:n]])
    g_e = np.stack([euler_zyx_from_matrix(R) for R in g_R[:n]])
    ang = np.degrees(wrap_angle(p_e - g_e))
    payload = {
        "pos_rmse_m": rmse(p_pos[:n], g_pos[:n]),
        "ori_rmse_deg": float(np.sqrt(np.mean(ang**2))),
        "n_pairs": int(n),
    }
    if out_path:
        _write_json(out_path, payload)
    click.echo(json.dumps(payload, sort_keys=True))


@cli.command()
@click.option("--data", "data_dir", required=True, type=click.Path())
@click.option("--det-ckpt", required=True, type=click.Path())
@click.option("--nav-ckpt", type=click.Path(), default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=0)
@click.option("--max-images", type=int, default=24)
@click.option("--force", is_flag=True)
def explain(data_dir, det_ckpt, nav_ckpt, out_dir, seed, max_images, force):
    """Attention-mask PCC report with figures and CSV export."""
    from .explain import build_report

    manifest = _load_manifest(data_dir)
    _require(det_ckpt, "crater-xai train-detect")
    if nav_ckpt is not None:
        _require(nav_ckpt, "crater-xai train-nav")
    out = _prepare_out(out_dir, force)
    record = RunRecord(
        "explain",
        "",
        {"det_ckpt": file_hash(det_ckpt)},
        time.time(),
    )
    report = build_report(
        manifest, data_dir, det_ckpt, nav_ckpt, out, max_images=max_images,
        seed=seed,
    )
    record.artifacts = [str(out / "pcc.csv")]
    record.write(out / "run_record.json")
    click.echo(f"report with {len(report.rows)} layers -> {out / 'pcc.csv'}")


@cli.command()
@click.option("--report", "report_dir", required=True, type=click.Path())
@click.option("--data", "data_dir", type=click.Path(), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
def plot(report_dir, data_dir, out_dir):
    """Re-render figures from report artifacts (bar charts, mosaics, overlays)."""
    from .explain.pcc import PccReport
    from .plots import save_detection_overlay, save_mask_mosaic, save_pcc_bars

    report_path = Path(report_dir)
    out = Path(out_dir) if out_dir else report_path
    out.mkdir(parents=True, exist_ok=True)
    produced = []
    pcc_csv = report_path / "pcc.csv"
    if pcc_csv.exists():
        produced.append(save_pcc_bars(PccReport.from_csv(pcc_csv), out))
    masks_npz = report_path / "masks.npz"
    if masks_npz.exists():
        masks = dict(np.load(masks_npz))
        save_mask_mosaic(masks, out / "mask_mosaic.png")
        produced.append(out / "mask_mosaic.png")
    det_csv = report_path / "detections.csv"
    if det_csv.exists() and data_dir is not None:
        from PIL import Image

        from .detector.boxes import DetectionBox

        manifest = _load_manifest(data_dir)
        by_frame = {}
        with open(det_csv, newline="") as f:
            for r in csv.DictReader(f):
                by_frame.setdefault(r["frame"], []).append(
                    DetectionBox(float(r["cx"]), float(r["cy"]), float(r["w"]),
                                 float(r["h"]), float(r["conf"]))
                )
        for _, fr in manifest.all_frames():
            stem = Path(fr.image_path).stem
            if stem in by_frame:
                img = np.asarray(
                    Image.open(Path(data_dir) / fr.image_path).convert("RGB")
                )
                path = out / f"{stem}_overlay.png"
                save_detection_overlay(img, fr.labels, by_frame[stem], path)
                produced.append(path)
    if not produced:
        click.echo("warning: no report artifacts found; nothing to plot", err=True)
    else:
        click.echo(f"wrote {len(produced)} figures to {out}")


def main():
    try:
        cli(standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except MissingPrerequisiteError as exc:
        click.echo(str(exc), err=True)
        sys.exit(3)
    except NumericalFailureError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(4)


if __name__ == "__main__":
    main()
