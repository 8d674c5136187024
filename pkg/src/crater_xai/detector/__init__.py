from .anchors import AnchorSet, kmeans_anchors
from .boxes import DetectionBox, iou, nms
from .losses import DetectorLossBreakdown, ciou_loss_term, objectness_loss, total_loss
from .model import CraterDetector, decode_and_nms, decode_raw
from .train import DetectorSchedule, train_detector

__all__ = [
    "AnchorSet",
    "CraterDetector",
    "DetectionBox",
    "DetectorLossBreakdown",
    "DetectorSchedule",
    "ciou_loss_term",
    "decode_and_nms",
    "decode_raw",
    "iou",
    "kmeans_anchors",
    "nms",
    "objectness_loss",
    "total_loss",
    "train_detector",
]
