"""
Segmentation, mixup and total objectives.
"""
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from ..exceptions import NonFiniteError
from ..models import IGNORE_ID


def segmentation_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Pixel cross-entropy with the ignore id excluded."""
    return F.cross_entropy(logits, labels, ignore_index=IGNORE_ID)


def mixup_loss(logits: torch.Tensor, labels: torch.Tensor, pixel_weight: torch.Tensor) -> torch.Tensor:
    """Pixel-weighted cross-entropy averaged over non-ignore pixels."""
    per_pixel = F.cross_entropy(logits, labels, ignore_index=IGNORE_ID, reduction="none")
    valid = (labels != IGNORE_ID).to(per_pixel.dtype)
    return (per_pixel * pixel_weight * valid).sum() / valid.sum().clamp_min(1.0)


@dataclass
class TotalLoss:
    seg: torch.Tensor
    mixup: torch.Tensor
    graph: torch.Tensor
    gamma: float

    @property
    def total(self) -> torch.Tensor:
        return self.seg + self.mixup + self.gamma * self.graph


def total_loss(seg: torch.Tensor, mixup: torch.Tensor, graph: torch.Tensor, gamma: float) -> TotalLoss:
    """
    seg + mixup + gamma * graph.

    Raises:
        NonFiniteError: If any component is NaN or Inf, naming the components
    """
    bad = [
        name for name, value in (("seg", seg), ("mixup", mixup), ("graph", graph))
        if not torch.isfinite(torch.as_tensor(value)).all()
    ]
    if bad:
        raise NonFiniteError(f"Non-finite loss component(s): {', '.join(bad)}")
    return TotalLoss(seg=seg, mixup=mixup, graph=graph, gamma=gamma)
