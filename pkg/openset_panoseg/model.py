"""
Toy encoder-decoder segmentation network with attention blocks on decoder features.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .attention import create_attention
from .config import TrainConfig
from .data.transforms import IMAGE_MEAN, IMAGE_STD
from .exceptions import InvalidInputError, ShapeMismatchError

logger = logging.getLogger(__name__)

ENCODER_CHANNELS = (16, 32, 64, 128)


@dataclass
class SegmentationOutput:
    logits: torch.Tensor            # (B, C, H, W) at input resolution
    feature_logits: torch.Tensor    # (B, C, H/4, W/4)
    features: torch.Tensor          # (B, N, d), N = H/4 * W/4
    feature_size: Tuple[int, int]


def _norm(channels: int) -> nn.GroupNorm:
    return nn.GroupNorm(min(8, channels), channels)


class EncoderStage(nn.Sequential):
    def __init__(self, in_channels: int, out_channels: int):
        super().__init__(
            nn.Conv2d(in_channels, out_channels, 3, stride=2, padding=1, bias=False),
            _norm(out_channels),
            nn.GELU(),
            nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False),
            _norm(out_channels),
            nn.GELU(),
        )


class Decoder(nn.Module):
    """Projects every stage to d channels, upsamples to 1/4 resolution and fuses."""

    def __init__(self, channels: Tuple[int, ...], dim: int):
        super().__init__()
        self.projections = nn.ModuleList(nn.Conv2d(c, dim, 1) for c in channels)
        self.fuse = nn.Sequential(
            nn.Conv2d(dim * len(channels), dim, 1, bias=False),
            _norm(dim),
            nn.GELU(),
        )

    def forward(self, stages: List[torch.Tensor]) -> torch.Tensor:
        size = stages[1].shape[-2:]
        maps = [
            F.interpolate(proj(x), size=size, mode="bilinear", align_corners=False) if x.shape[-2:] != size else proj(x)
            for proj, x in zip(self.projections, stages)
        ]
        return self.fuse(torch.cat(maps, dim=1))


class SegmentationModel(nn.Module):
    """
    Four stride-2 convolutional stages, a fusion decoder at 1/4 resolution, a stack of
    attention blocks on the flattened decoder tokens and a linear classifier with
    num_base + 1 outputs (the last one is the unknown class).
    """

    def __init__(
        self,
        num_classes: int,
        feature_dim: int = 64,
        attention_mode: str = "euler",
        attention_blocks: int = 2,
        attention_heads: int = 4,
        **attention_kwargs,
    ):
        super().__init__()
        if feature_dim % (2 * attention_heads):
            raise InvalidInputError(
                f"feature_dim ({feature_dim}) must be divisible by 2*attention_heads ({2 * attention_heads})"
            )
        self.num_classes = num_classes
        self.feature_dim = feature_dim
        self.register_buffer("image_mean", torch.tensor(IMAGE_MEAN).view(1, 3, 1, 1))
        self.register_buffer("image_std", torch.tensor(IMAGE_STD).view(1, 3, 1, 1))

        stages = []
        in_channels = 3
        for out_channels in ENCODER_CHANNELS:
            stages.append(EncoderStage(in_channels, out_channels))
            in_channels = out_channels
        self.encoder = nn.ModuleList(stages)
        self.decoder = Decoder(ENCODER_CHANNELS, feature_dim)
        self.attention = nn.ModuleList(
            create_attention(attention_mode, feature_dim, attention_heads, **(attention_kwargs if attention_mode == "euler" else {}))
            for _ in range(attention_blocks)
        )
        self.head = nn.Linear(feature_dim, num_classes)

    @classmethod
    def from_config(cls, config: TrainConfig, num_base: int) -> "SegmentationModel":
        return cls(
            num_classes=num_base + 1,
            feature_dim=config.feature_dim,
            attention_mode=config.attention_mode,
            attention_blocks=config.attention_blocks,
            attention_heads=config.attention_heads,
            tau_sort=config.tau_sort,
            hard_sort_eval=config.hard_sort_eval,
            use_margin_projection=config.use_margin_projection,
            learn_amplitude=config.learn_amplitude,
            learn_scale=config.learn_scale,
            learn_bias=config.learn_bias,
        )

    def encode_decode(self, images: torch.Tensor) -> Tuple[torch.Tensor, Tuple[int, int]]:
        """
        Features at 1/4 resolution.

        Args:
            images: (B, 3, H, W) in [0, 1], H and W divisible by 16

        Returns:
            ((B, N, d) tokens, (H/4, W/4))
        """
        if images.dim() != 4 or images.shape[1] != 3:
            raise ShapeMismatchError(f"Expected (B, 3, H, W) images, got {tuple(images.shape)}")
        height, width = images.shape[-2:]
        if height % 16 or width % 16:
            raise InvalidInputError(f"Input size {height}x{width} is not divisible by 16")
        if not torch.isfinite(images).all() or images.min() < 0 or images.max() > 1:
            raise InvalidInputError("Images must be finite and within [0, 1]")

        x = (images - self.image_mean) / self.image_std
        stages = []
        for stage in self.encoder:
            x = stage(x)
            stages.append(x)
        fused = self.decoder(stages)
        size = (fused.shape[-2], fused.shape[-1])
        tokens = fused.flatten(2).transpose(1, 2)
        for block in self.attention:
            tokens = block(tokens)
        return tokens, size

    def classify(self, features: torch.Tensor, size: Tuple[int, int]) -> torch.Tensor:
        """Per-token linear head, reshaped to (B, C, h, w)."""
        if features.shape[-1] != self.feature_dim:
            raise ShapeMismatchError(f"Feature dimension {features.shape[-1]} != head input {self.feature_dim}")
        b, n, _ = features.shape
        if n != size[0] * size[1]:
            raise ShapeMismatchError(f"{n} tokens cannot be laid out as {size[0]}x{size[1]}")
        return self.head(features).transpose(1, 2).reshape(b, self.num_classes, *size)

    def forward(self, images: torch.Tensor) -> SegmentationOutput:
        features, size = self.encode_decode(images)
        feature_logits = self.classify(features, size)
        logits = F.interpolate(feature_logits, size=images.shape[-2:], mode="bilinear", align_corners=False)
        return SegmentationOutput(logits, feature_logits, features, size)

    def param_groups(self) -> Dict[str, List[nn.Parameter]]:
        """Encoder parameters train at the base rate; everything after it at the decoder rate."""
        encoder = [p for p in self.encoder.parameters() if p.requires_grad]
        decoder = [
            p for name, p in self.named_parameters()
            if p.requires_grad and not name.startswith("encoder.")
        ]
        return {"encoder": encoder, "decoder": decoder}


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def parameter_summary(model: SegmentationModel, adapter: nn.Module) -> Dict[str, int]:
    """Parameter counts per component."""
    return {
        "encoder": count_parameters(model.encoder),
        "decoder": count_parameters(model.decoder),
        "attention": count_parameters(model.attention),
        "head": count_parameters(model.head),
        "graph_adapter": count_parameters(adapter),
        "total": count_parameters(model) + count_parameters(adapter),
    }
