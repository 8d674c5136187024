"""Channel-then-spatial soft attention (CBAM-style)."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


def channel_attention(x: torch.Tensor, w0: torch.Tensor, w1: torch.Tensor) -> torch.Tensor:
    """Per-channel attention weights in (0,1).

    x: (N,C,H,W); w0: (C/r, C); w1: (C, C/r).  Shared MLP over the global
    average- and max-pooled descriptors, summed, sigmoid.
    """
    if x.dim() != 4:
        raise ValueError(f"expected NCHW input, got shape {tuple(x.shape)}")
    c = x.shape[1]
    if w0.shape[1] != c or w1.shape[0] != c or w1.shape[1] != w0.shape[0]:
        raise ValueError(
            f"MLP weights {tuple(w0.shape)}/{tuple(w1.shape)} do not match C={c}"
        )
    avg = x.mean(dim=(2, 3))
    mx = x.amax(dim=(2, 3))
    shared = lambda d: F.linear(F.relu(F.linear(d, w0)), w1)
    return torch.sigmoid(shared(avg) + shared(mx)).view(-1, c, 1, 1)


def spatial_attention(x: torch.Tensor, conv_weight: torch.Tensor, conv_bias=None) -> torch.Tensor:
    """Spatial attention mask (N,1,H,W) in (0,1).

    Channelwise avg/max pooling, 2-channel concat, 7x7 conv, sigmoid.
    """
    if x.dim() != 4:
        raise ValueError(f"expected NCHW input, got shape {tuple(x.shape)}")
    avg = x.mean(dim=1, keepdim=True)
    mx = x.amax(dim=1, keepdim=True)
    pooled = torch.cat([avg, mx], dim=1)
    pad = conv_weight.shape[-1] // 2
    return torch.sigmoid(F.conv2d(pooled, conv_weight, conv_bias, padding=pad))


def cbam_apply(x, w0, w1, conv_weight, conv_bias=None):
    """Refine features: channel attention, then spatial attention.

    Returns (refined, spatial_mask).
    """
    mc = channel_attention(x, w0, w1)
    xp = mc * x
    ms = spatial_attention(xp, conv_weight, conv_bias)
    return ms * xp, ms


class ChannelAttention(nn.Module):
    def __init__(self, channels: int, reduction: int = 16):
        super().__init__()
        if channels % reduction != 0:
            raise ValueError(f"reduction {reduction} must divide channels {channels}")
        hidden = channels // reduction
        self.w0 = nn.Linear(channels, hidden, bias=False)
        self.w1 = nn.Linear(hidden, channels, bias=False)

    def forward(self, x):
        return channel_attention(x, self.w0.weight, self.w1.weight)


class SpatialAttention(nn.Module):
    def __init__(self, kernel_size: int = 7):
        super().__init__()
        self.conv = nn.Conv2d(2, 1, kernel_size, padding=kernel_size // 2, bias=False)

    def forward(self, x):
        return spatial_attention(x, self.conv.weight, self.conv.bias)


class CBAM(nn.Module):
    """Sequential channel + spatial attention; keeps the spatial mask."""

    def __init__(self, channels: int, reduction: int = 16, kernel_size: int = 7):
        super().__init__()
        self.ca = ChannelAttention(channels, reduction)
        self.sa = SpatialAttention(kernel_size)

    def forward(self, x):
        xp = self.ca(x) * x
        mask = self.sa(xp)
        return mask * xp, mask
