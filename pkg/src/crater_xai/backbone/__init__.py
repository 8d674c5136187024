from .cbam import CBAM, ChannelAttention, SpatialAttention, channel_attention, spatial_attention, cbam_apply
from .darknet import (
    AttentionDarknet,
    AttentionMaskSet,
    BackboneConfig,
    BackboneOutput,
    ConvBNLeaky,
    ResidualUnit,
    extract_attention,
    load_checkpoint,
    param_hash,
    save_checkpoint,
)

__all__ = [
    "AttentionDarknet",
    "AttentionMaskSet",
    "BackboneConfig",
    "BackboneOutput",
    "CBAM",
    "ChannelAttention",
    "ConvBNLeaky",
    "ResidualUnit",
    "SpatialAttention",
    "cbam_apply",
    "channel_attention",
    "extract_attention",
    "load_checkpoint",
    "param_hash",
    "save_checkpoint",
    "spatial_attention",
]
