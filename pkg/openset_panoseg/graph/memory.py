"""
Per-domain class memory and completion of classes missing from a batch.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import torch
import torch.nn as nn

from ..exceptions import InvalidInputError
from .nodes import Domain, NodeKind, NodeSet

logger = logging.getLogger(__name__)


@dataclass
class MemoryBank:
    """
    Running per-class feature statistics of one domain.

    Attributes:
        means: (C, d) running mean feature per class
        sq_means: (C, d) running mean of squared features, for the per-class std
        counts: (C,) number of updates per class
        initialized: (C,) whether the class has ever been updated
    """
    means: torch.Tensor
    sq_means: torch.Tensor
    counts: torch.Tensor
    initialized: torch.Tensor

    @classmethod
    def empty(cls, num_classes: int, dim: int, dtype: torch.dtype = torch.float32) -> "MemoryBank":
        return cls(
            means=torch.zeros(num_classes, dim, dtype=dtype),
            sq_means=torch.zeros(num_classes, dim, dtype=dtype),
            counts=torch.zeros(num_classes, dtype=torch.long),
            initialized=torch.zeros(num_classes, dtype=torch.bool),
        )

    @property
    def num_classes(self) -> int:
        return self.means.shape[0]

    @property
    def std(self) -> torch.Tensor:
        return (self.sq_means - self.means ** 2).clamp_min(0.0).sqrt()

    def clone(self) -> "MemoryBank":
        return MemoryBank(self.means.clone(), self.sq_means.clone(), self.counts.clone(), self.initialized.clone())


def update_memory(bank: MemoryBank, class_sets: Dict[int, torch.Tensor], alpha: float) -> MemoryBank:
    """
    Exponential moving average of per-class set means.

    new = (1 - alpha) * old + alpha * mean(set). The first update of a class writes the
    set mean directly; classes with an empty or missing set are untouched.

    Returns:
        A new MemoryBank; `bank` is not modified
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"Memory decay must lie in [0, 1], got {alpha}")
    new = bank.clone()
    for class_id, feats in sorted(class_sets.items()):
        if feats.numel() == 0:
            continue
        if not 0 <= class_id < bank.num_classes:
            raise InvalidInputError(f"Class {class_id} outside memory of {bank.num_classes} classes")
        feats = feats.detach().to(new.means.dtype)
        mean = feats.mean(dim=0)
        sq = (feats ** 2).mean(dim=0)
        if bool(new.initialized[class_id]):
            new.means[class_id] = (1.0 - alpha) * new.means[class_id] + alpha * mean
            new.sq_means[class_id] = (1.0 - alpha) * new.sq_means[class_id] + alpha * sq
        else:
            new.means[class_id] = mean
            new.sq_means[class_id] = sq
            new.initialized[class_id] = True
        new.counts[class_id] += 1
    return new


def node_class_sets(nodes: NodeSet) -> Dict[int, torch.Tensor]:
    """Features of sampled (non-synthesized) nodes grouped by class."""
    sampled = nodes.select(~nodes.kind_mask(NodeKind.SYNTHESIZED))
    return {c: sampled.features[idx] for c, idx in sampled.class_index().items()}


def complete_missing_classes(
    nodes: NodeSet,
    bank_self: MemoryBank,
    bank_other: MemoryBank,
    domain: Domain,
    expected: Iterable[int],
    generator: Optional[torch.Generator] = None,
) -> Tuple[NodeSet, List[int]]:
    """
    Append one synthesized node for each expected class absent from `nodes`.

    The node is the current-domain memory mean plus Gaussian noise whose per-dimension
    std is the counterpart domain's running std for that class.

    Returns:
        (completed NodeSet, classes skipped because a bank is not initialized for them)
    """
    present = set(nodes.present_classes(domain))
    parts = [nodes]
    skipped: List[int] = []
    for class_id in sorted(set(expected) - present):
        if not (bool(bank_self.initialized[class_id]) and bool(bank_other.initialized[class_id])):
            skipped.append(class_id)
            continue
        std = bank_other.std[class_id]
        eps = torch.randn(std.shape, generator=generator, dtype=std.dtype).to(std.device)
        feature = (bank_self.means[class_id] + std * eps).to(device=nodes.features.device, dtype=nodes.features.dtype)
        parts.append(NodeSet.build(feature.unsqueeze(0), class_id, domain, NodeKind.SYNTHESIZED))
    if skipped:
        logger.warning(
            "Cannot synthesize %s node(s) for classes %s: memory not initialized",
            domain.name.lower(), skipped,
        )
    return NodeSet.concat(parts), skipped


class MemoryStore(nn.Module):
    """Holds a MemoryBank as module buffers so it travels with state_dict()."""

    def __init__(self, num_classes: int, dim: int):
        super().__init__()
        bank = MemoryBank.empty(num_classes, dim)
        self.register_buffer("means", bank.means)
        self.register_buffer("sq_means", bank.sq_means)
        self.register_buffer("counts", bank.counts)
        self.register_buffer("initialized", bank.initialized)

    @property
    def bank(self) -> MemoryBank:
        return MemoryBank(self.means, self.sq_means, self.counts, self.initialized)

    @torch.no_grad()
    def commit(self, bank: MemoryBank) -> None:
        self.means.copy_(bank.means)
        self.sq_means.copy_(bank.sq_means)
        self.counts.copy_(bank.counts)
        self.initialized.copy_(bank.initialized)
