"""Dataset directory layout, round-trip I/O, and full generation.

Layout:
    manifest.json              seed, camera intrinsics, trajectory index
    traj_<k>/frame_<i>.png     256x256 RGB
    traj_<k>/labels.csv        frame,cx_px,cy_px,r_px
    traj_<k>/poses.csv         frame,px,py,pz,qw,qx,qy,qz
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DatasetIOError
from ..geometry import CameraModel, Pose, default_camera
from .field import generate_crater_field
from .project import CraterLabel2D, project_craters
from .render import RenderOptions, render_frame
from .trajectory import generate_trajectory

FLOAT_FMT = "%.6f"


@dataclass
class FrameRecord:
    index: int
    image_path: str  # relative to the dataset root
    pose: Pose
    labels: list


@dataclass
class TrajectoryRecord:
    index: int
    frames: list


@dataclass
class DatasetManifest:
    seed: int
    camera: CameraModel
    trajectories: list = field(default_factory=list)

    def all_frames(self):
        for traj in self.trajectories:
            for frame in traj.frames:
                yield traj.index, frame

    def __eq__(self, other):
        if not isinstance(other, DatasetManifest):
            return NotImplemented
        if self.seed != other.seed:
            return False
        if self.camera.to_dict() != other.camera.to_dict():
            return False
        if len(self.trajectories) != len(other.trajectories):
            return False
        for ta, tb in zip(self.trajectories, other.trajectories):
            if ta.index != tb.index or len(ta.frames) != len(tb.frames):
                return False
            for fa, fb in zip(ta.frames, tb.frames):
                if fa.index != fb.index or fa.image_path != fb.image_path:
                    return False
                if not np.allclose(fa.pose.position, fb.pose.position, atol=1e-5):
                    return False
                if not np.allclose(fa.pose.rotation, fb.pose.rotation, atol=1e-5):
                    return False
                if len(fa.labels) != len(fb.labels):
                    return False
                for la, lb in zip(fa.labels, fb.labels):
                    if not np.allclose(la.center_px, lb.center_px, atol=5e-4):
                        return False
                    if abs(la.radius_px - lb.radius_px) > 5e-4:
                        return False
        return True


def write_dataset(manifest: DatasetManifest, out_dir, images=None) -> DatasetManifest:
    """Persist manifest, CSVs, and (when given) rendered images.

    images maps (traj_index, frame_index) to uint8 arrays; omit it when
    the referenced PNGs already exist on disk.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "seed": manifest.seed,
        "camera": manifest.camera.to_dict(),
        "trajectories": [
            {
                "index": t.index,
                "dir": f"traj_{t.index}",
                "n_frames": len(t.frames),
            }
            for t in manifest.trajectories
        ],
    }
    (out / "manifest.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    for traj in manifest.trajectories:
        tdir = out / f"traj_{traj.index}"
        tdir.mkdir(exist_ok=True)
        with open(tdir / "poses.csv", "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["frame", "px", "py", "pz", "qw", "qx", "qy", "qz"])
            for fr in traj.frames:
                wr.writerow(
                    [fr.index]
                    + [FLOAT_FMT % v for v in fr.pose.position]
                    + [FLOAT_FMT % v for v in fr.pose.rotation]
                )
        with open(tdir / "labels.csv", "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["frame", "cx_px", "cy_px", "r_px"])
            for fr in traj.frames:
                for lab in fr.labels:
                    wr.writerow(
                        [
                            fr.index,
                            FLOAT_FMT % lab.center_px[0],
                            FLOAT_FMT % lab.center_px[1],
                            FLOAT_FMT % lab.radius_px,
                        ]
                    )
        for fr in traj.frames:
            if images is not None and (traj.index, fr.index) in images:
                Image.fromarray(images[(traj.index, fr.index)]).save(
                    out / fr.image_path
                )
    return manifest


def read_dataset(dataset_dir) -> DatasetManifest:
    """Load a dataset directory, validating that referenced files exist."""
    root = Path(dataset_dir)
    mpath = root / "manifest.json"
    if not mpath.exists():
        raise DatasetIOError(f"missing manifest: {mpath}")
    try:
        meta = json.loads(mpath.read_text())
        camera = CameraModel.from_dict(meta["camera"])
        seed = int(meta["seed"])
    except (KeyError, ValueError, TypeError) as exc:
        raise DatasetIOError(f"malformed manifest {mpath}: {exc}") from exc

    trajectories = []
    for tmeta in meta["trajectories"]:
        tdir = root / tmeta["dir"]
        poses = {}
        try:
            with open(tdir / "poses.csv", newline="") as f:
                for row in csv.DictReader(f):
                    idx = int(row["frame"])
                    pos = [float(row[k]) for k in ("px", "py", "pz")]
                    q = np.array([float(row[k]) for k in ("qw", "qx", "qy", "qz")])
                    poses[idx] = Pose(pos, q / np.linalg.norm(q))
        except FileNotFoundError as exc:
            raise DatasetIOError(f"missing poses file: {tdir / 'poses.csv'}") from exc
        except (KeyError, ValueError) as exc:
            raise DatasetIOError(
                f"malformed record in {tdir / 'poses.csv'}: {exc}"
            ) from exc
        labels = {idx: [] for idx in poses}
        try:
            with open(tdir / "labels.csv", newline="") as f:
                for row in csv.DictReader(f):
                    idx = int(row["frame"])
                    labels.setdefault(idx, []).append(
                        CraterLabel2D(
                            [float(row["cx_px"]), float(row["cy_px"])],
                            float(row["r_px"]),
                        )
                    )
        except FileNotFoundError as exc:
            raise DatasetIOError(f"missing labels file: {tdir / 'labels.csv'}") from exc
        except (KeyError, ValueError) as exc:
            raise DatasetIOError(
                f"malformed record in {tdir / 'labels.csv'}: {exc}"
            ) from exc
        frames = []
        for idx in sorted(poses):
            rel = f"{tmeta['dir']}/frame_{idx}.png"
            if not (root / rel).exists():
                raise DatasetIOError(f"missing image file: {root / rel}")
            frames.append(FrameRecord(idx, rel, poses[idx], labels.get(idx, [])))
        trajectories.append(TrajectoryRecord(int(tmeta["index"]), frames))
    return DatasetManifest(seed=seed, camera=camera, trajectories=trajectories)


def generate_dataset(
    out_dir,
    seed: int,
    n_trajectories: int = 10,
    n_frames: int = 50,
    area_m: float = 3000.0,
    crater_count: int = 3000,
    noise_sigma: float = 2.0,
    att_sigma_deg: float = 0.5,
    start_alt_m: float = 1500.0,
    end_alt_m: float = 200.0,
    camera: CameraModel = None,
    render_options: RenderOptions = None,
) -> DatasetManifest:
    """Generate, render, and persist a complete synthetic landing dataset."""
    cam = camera or default_camera()
    opts = render_options or RenderOptions()
    field_list = generate_crater_field(seed, area_m, crater_count)
    trajectories = []
    images = {}
    for k in range(n_trajectories):
        traj = generate_trajectory(
            seed + 1000 + k,
            n_frames,
            start_alt_m=start_alt_m,
            end_alt_m=end_alt_m,
            noise_sigma=noise_sigma,
            att_sigma_deg=att_sigma_deg,
        )
        frames = []
        for i, pose in traj.frames:
            labels = project_craters(field_list, pose, cam)
            images[(k, i)] = render_frame(field_list, pose, cam, seed, opts)
            frames.append(FrameRecord(i, f"traj_{k}/frame_{i}.png", pose, labels))
        trajectories.append(TrajectoryRecord(k, frames))
    manifest = DatasetManifest(seed=seed, camera=cam, trajectories=trajectories)
    write_dataset(manifest, out_dir, images=images)
    return manifest
