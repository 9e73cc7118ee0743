"""
Three-term graph loss: matching, edge consistency and unknown-aware regularization.
"""
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn.functional as F

from ..exceptions import ShapeMismatchError
from .nodes import NodeSet


@dataclass
class GraphLossTerms:
    match: torch.Tensor
    edge: torch.Tensor
    unknown: torch.Tensor

    @property
    def total(self) -> torch.Tensor:
        return self.match + self.edge + self.unknown


def unknown_regularization(features: torch.Tensor, classes: torch.Tensor, unknown_id: int) -> torch.Tensor:
    """||Vk Vu^T||_F^2 / (|K| |U|) on unit-normalized features; 0 without both groups."""
    unknown = classes == unknown_id
    known = ~unknown
    n_k, n_u = int(known.sum()), int(unknown.sum())
    if n_k == 0 or n_u == 0:
        return features.sum() * 0.0
    unit = F.normalize(features, dim=1, eps=1e-12)
    cross = unit[known] @ unit[unknown].transpose(0, 1)
    return (cross ** 2).sum() / (n_k * n_u)


def gma_loss(
    matching: torch.Tensor,
    labels: torch.Tensor,
    xi_source: torch.Tensor,
    xi_target: torch.Tensor,
    source: NodeSet,
    target: NodeSet,
    unknown_id: int,
    beta: float = 0.1,
    match_mask: Optional[torch.Tensor] = None,
    use_match: bool = True,
    use_edge: bool = True,
    use_unknown: bool = True,
) -> GraphLossTerms:
    """
    Graph loss over a matched source/target node pair.

    match   = mean over entries of (A - M)^2
    edge    = ||xi_s A - A xi_t||_1 / (n_s n_t)
    unknown = beta * (target and source known/unknown cross-similarity terms)

    Args:
        matching: (n_s, n_t) Sinkhorn output A
        labels: (n_s, n_t) binary matching labels M
        xi_source: (n_s, n_s) source edge affinity
        xi_target: (n_t, n_t) target edge affinity
        source: Source nodes (after graph generation)
        target: Target nodes (after graph generation)
        match_mask: Optional (n_s, n_t) bool mask restricting the matching term
        use_match, use_edge, use_unknown: Term switches; a disabled term is 0

    Raises:
        ShapeMismatchError: With the offending dimensions
    """
    n_s, n_t = matching.shape
    if labels.shape != (n_s, n_t):
        raise ShapeMismatchError(f"Matching labels {tuple(labels.shape)} vs matching {(n_s, n_t)}")
    if xi_source.shape != (n_s, n_s):
        raise ShapeMismatchError(f"Source edge affinity {tuple(xi_source.shape)}, expected {(n_s, n_s)}")
    if xi_target.shape != (n_t, n_t):
        raise ShapeMismatchError(f"Target edge affinity {tuple(xi_target.shape)}, expected {(n_t, n_t)}")
    if len(source) != n_s or len(target) != n_t:
        raise ShapeMismatchError(f"Node counts ({len(source)}, {len(target)}) vs matching {(n_s, n_t)}")
    if match_mask is not None and match_mask.shape != (n_s, n_t):
        raise ShapeMismatchError(f"Match mask {tuple(match_mask.shape)} vs matching {(n_s, n_t)}")

    zero = matching.sum() * 0.0
    labels = labels.to(matching.dtype)

    match = zero
    if use_match:
        sq = (matching - labels) ** 2
        if match_mask is None:
            match = sq.mean()
        elif match_mask.any():
            match = sq[match_mask].mean()

    edge = zero
    if use_edge:
        edge = (xi_source @ matching - matching @ xi_target).abs().sum() / (n_s * n_t)

    unknown = zero
    if use_unknown:
        unknown = beta * (
            unknown_regularization(target.features, target.classes, unknown_id)
            + unknown_regularization(source.features, source.classes, unknown_id)
        )
    return GraphLossTerms(match=match, edge=edge, unknown=unknown)
