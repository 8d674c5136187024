"""Attention backbone + two-layer LSTM relative pose network.

The network consumes pairs of consecutive 256x256 frames stacked
vertically into 512x256 tensors and emits a 9-vector per pair: 3 for
relative position, 6 for rotation in the continuity representation.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from ..backbone import AttentionDarknet, BackboneConfig


def stack_pair(img_t: torch.Tensor, img_t1: torch.Tensor) -> torch.Tensor:
    """Stack frame t above frame t+1 along the vertical image axis.

    Both inputs are (3,256,256); the result is (3,512,256) with the top
    half equal to img_t bit-exactly.
    """
    img_t = torch.as_tensor(img_t)
    img_t1 = torch.as_tensor(img_t1)
    if img_t.shape != img_t1.shape:
        raise ValueError(
            f"image shapes differ: {tuple(img_t.shape)} vs {tuple(img_t1.shape)}"
        )
    if img_t.dim() != 3 or img_t.shape[0] != 3:
        raise ValueError(f"expected (3,H,W) images, got {tuple(img_t.shape)}")
    return torch.cat([img_t, img_t1], dim=1)


def split_pose9(out9: torch.Tensor):
    """(...,9) network output -> (position (...,3), rotation6d (...,6))."""
    return out9[..., :3], out9[..., 3:]


class PoseNavigator(nn.Module):
    def __init__(self, config: BackboneConfig = None, hidden_size: int = None):
        super().__init__()
        self.backbone = AttentionDarknet(config)
        feat = self.backbone.out_channels
        if hidden_size is None:
            hidden_size = 1000 if feat >= 1024 else 128
        self.hidden_size = hidden_size
        self.lstm = nn.LSTM(feat, hidden_size, num_layers=2, batch_first=True)
        self.head = nn.Linear(hidden_size, 9)

    def extract_features(self, pairs: torch.Tensor):
        """(T,3,H,W) stacked pairs -> ((T,C) pooled features, mask sets)."""
        out = self.backbone(pairs)
        feats = out.final.mean(dim=(2, 3))
        return feats, out.masks

    def forward_sequence(self, pairs: torch.Tensor, hidden=None):
        """Run an ordered sequence of stacked pairs through the network.

        pairs: (T,3,H,W).  Returns ((T,9) outputs, hidden) where hidden can
        be carried into the next call; processing a sequence in chunks with
        carried state matches a single full-length call (in eval mode).
        """
        pairs = torch.as_tensor(pairs)
        if pairs.dim() != 4 or pairs.shape[0] < 1:
            raise ValueError("expected a nonempty (T,3,H,W) sequence")
        if hidden is not None:
            h, c = hidden
            expect = (2, 1, self.hidden_size)
            if tuple(h.shape) != expect or tuple(c.shape) != expect:
                raise ValueError(
                    f"hidden state shape {tuple(h.shape)} != {expect}"
                )
        feats, masks = self.extract_features(pairs)
        seq, hidden = self.lstm(feats[None], hidden)
        out9 = self.head(seq[0])
        return out9, hidden, masks

    def forward(self, pairs, hidden=None):
        out9, hidden, _ = self.forward_sequence(pairs, hidden)
        return out9, hidden
