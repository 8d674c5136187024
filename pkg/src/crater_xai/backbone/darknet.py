"""Darknet53-style residual backbone with one CBAM per residual unit.

Attention masks are exposed under ids "B_ij": unit j of residual stage i.
The standard stage layout (1,2,8,8,4) yields 24 masks for a 256x256 input
with a 1024-channel 8x8 final feature map.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .cbam import CBAM


@dataclass
class BackboneConfig:
    stage_units: tuple = (1, 2, 8, 8, 4)
    stage_channels: tuple = (64, 128, 256, 512, 1024)
    stem_channels: int = 32
    reduction: int = 16

    def __post_init__(self):
        if len(self.stage_units) != len(self.stage_channels):
            raise ValueError("stage_units and stage_channels length mismatch")
        for c in self.stage_channels:
            if c % self.reduction != 0:
                raise ValueError(f"reduction {self.reduction} must divide channels {c}")

    @classmethod
    def tiny(cls) -> "BackboneConfig":
        """Small CI-friendly variant; same layer naming and invariants."""
        return cls(stage_units=(1, 1, 2, 2, 2), stage_channels=(16, 32, 64, 128, 256),
                   stem_channels=8)

    def layer_ids(self) -> list:
        return [
            f"B_{i + 1}{j + 1}"
            for i, n in enumerate(self.stage_units)
            for j in range(n)
        ]


class ConvBNLeaky(nn.Module):
    def __init__(self, c_in, c_out, kernel_size, stride=1):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, kernel_size, stride,
                              padding=kernel_size // 2, bias=False)
        self.bn = nn.BatchNorm2d(c_out)
        self.act = nn.LeakyReLU(0.1)

    def forward(self, x):
        return self.act(self.bn(self.conv(x)))


class ResidualUnit(nn.Module):
    """1x1 squeeze + 3x3 expand with identity skip, then CBAM."""

    def __init__(self, channels, reduction=16):
        super().__init__()
        self.conv1 = ConvBNLeaky(channels, channels // 2, 1)
        self.conv2 = ConvBNLeaky(channels // 2, channels, 3)
        self.cbam = CBAM(channels, reduction)

    def forward(self, x):
        y = x + self.conv2(self.conv1(x))
        return self.cbam(y)


class AttentionMaskSet:
    """Spatial attention masks keyed by layer id "B_ij"."""

    def __init__(self, masks: dict):
        self.masks = masks

    def layer_ids(self) -> list:
        return list(self.masks)

    def __len__(self):
        return len(self.masks)

    def __contains__(self, layer_id):
        return layer_id in self.masks

    def __getitem__(self, layer_id):
        if layer_id not in self.masks:
            raise KeyError(f"unknown attention layer id: {layer_id}")
        return self.masks[layer_id]


def extract_attention(mask_set: AttentionMaskSet, layer_id: str,
                      target_size=(256, 256)) -> torch.Tensor:
    """Bilinearly resize one mask to target_size (height, width)."""
    mask = mask_set[layer_id]
    if mask.dim() == 2:
        mask = mask[None, None]
    elif mask.dim() == 3:
        mask = mask[:, None]
    out = F.interpolate(mask, size=target_size, mode="bilinear", align_corners=False)
    return out.squeeze(1).squeeze(0)


class AttentionDarknet(nn.Module):
    def __init__(self, config: BackboneConfig = None):
        super().__init__()
        self.config = config or BackboneConfig()
        cfg = self.config
        self.stem = ConvBNLeaky(3, cfg.stem_channels, 3)
        c_prev = cfg.stem_channels
        for i, (units, ch) in enumerate(zip(cfg.stage_units, cfg.stage_channels), 1):
            stage = nn.Module()
            stage.down = ConvBNLeaky(c_prev, ch, 3, stride=2)
            for j in range(1, units + 1):
                setattr(stage, f"unit{j}", ResidualUnit(ch, cfg.reduction))
            setattr(self, f"stage{i}", stage)
            c_prev = ch

    @property
    def out_channels(self) -> int:
        return self.config.stage_channels[-1]

    def forward(self, x):
        """Returns BackboneOutput(final, masks, routes).

        x: (N,3,H,W) with H and W multiples of 32.  routes holds the
        outputs of the last three stages for multi-scale heads.
        """
        if x.dim() == 3:
            x = x[None]
        if x.dim() != 4 or x.shape[1] != 3:
            raise ValueError(f"expected (N,3,H,W) input, got {tuple(x.shape)}")
        if x.shape[2] % 32 or x.shape[3] % 32:
            raise ValueError("input height and width must be multiples of 32")
        masks = {}
        routes = {}
        y = self.stem(x)
        n_stages = len(self.config.stage_units)
        for i in range(1, n_stages + 1):
            stage = getattr(self, f"stage{i}")
            y = stage.down(y)
            for j in range(1, self.config.stage_units[i - 1] + 1):
                y, mask = getattr(stage, f"unit{j}")(y)
                masks[f"B_{i}{j}"] = mask.squeeze(1)
            routes[f"s{i}"] = y
        return BackboneOutput(final=y, masks=AttentionMaskSet(masks), routes=routes)


@dataclass
class BackboneOutput:
    final: torch.Tensor
    masks: AttentionMaskSet
    routes: dict


def param_hash(module: nn.Module) -> str:
    """Content hash of all parameters; used to verify freeze contracts."""
    h = hashlib.sha256()
    for name, p in sorted(module.named_parameters()):
        h.update(name.encode())
        h.update(p.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def save_checkpoint(model: nn.Module, path, meta: dict = None):
    torch.save({"state_dict": model.state_dict(), "meta": meta or {}}, path)


def load_checkpoint(path) -> dict:
    return torch.load(path, map_location="cpu", weights_only=False)
