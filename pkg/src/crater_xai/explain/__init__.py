from .masks import RING_VALUES, ring_mask
from .pcc import PccReport, pcc1, pcc2, pcc3_pcc4, pearson
from .warp import AffineWarp, affine_from_pose, ground_plane_in_camera, warp_apply
from .report import build_report

__all__ = [
    "AffineWarp",
    "PccReport",
    "RING_VALUES",
    "affine_from_pose",
    "build_report",
    "ground_plane_in_camera",
    "pcc1",
    "pcc2",
    "pcc3_pcc4",
    "pearson",
    "ring_mask",
    "warp_apply",
]
