"""
Node sampling guided by confidence, entropy and distance to the class mean.
"""
import logging
from typing import Optional, Tuple

import torch

from ..exceptions import InvalidInputError, NonFiniteError, ShapeMismatchError
from ..models import IGNORE_ID
from .nodes import Domain, NodeKind, NodeSet

logger = logging.getLogger(__name__)


def pixel_confidence_entropy(logits: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Per-pixel confidence and entropy.

    Args:
        logits: (B, C, H, W)

    Returns:
        (p, H), both (B, H, W): max softmax probability and natural-log entropy
    """
    if logits.dim() != 4:
        raise ShapeMismatchError(f"Expected (B, C, H, W) logits, got {tuple(logits.shape)}")
    if not torch.isfinite(logits).all():
        raise NonFiniteError("pixel_confidence_entropy received non-finite logits")
    log_prob = torch.log_softmax(logits, dim=1)
    prob = log_prob.exp()
    confidence = prob.max(dim=1).values
    entropy = -(prob * log_prob).sum(dim=1)
    return confidence, entropy.clamp_min(0.0)


def median(values: torch.Tensor) -> torch.Tensor:
    """Interpolated median (0.5 quantile)."""
    return torch.quantile(values.detach().to(torch.float64), 0.5).to(values.dtype)


def nearest(features: torch.Tensor, candidates: torch.Tensor, center: torch.Tensor, k: int) -> torch.Tensor:
    """The `k` candidate indices closest to `center`, ties broken by position."""
    if candidates.numel() <= k:
        return candidates
    dist = (features[candidates].detach() - center.detach()).norm(dim=1)
    order = torch.argsort(dist, stable=True)
    return candidates[order[:k]]


def prototype(
    features: torch.Tensor,
    center: torch.Tensor,
    noise: float,
    generator: Optional[torch.Generator],
) -> torch.Tensor:
    """center + N(0, (noise * per-dimension std)^2), shape (1, d)."""
    if noise > 0 and features.shape[0] > 1:
        std = features.detach().std(dim=0, unbiased=False)
        eps = torch.randn(std.shape, generator=generator, dtype=std.dtype, device="cpu").to(std.device)
        return (center + noise * std * eps).unsqueeze(0)
    return center.unsqueeze(0)


def sample_base_nodes(
    features: torch.Tensor,
    labels: torch.Tensor,
    confidence: torch.Tensor,
    entropy: torch.Tensor,
    k: int,
    num_base: int,
    domain: Domain,
    noise: float = 0.1,
    generator: Optional[torch.Generator] = None,
) -> NodeSet:
    """
    Positive, negative and prototype nodes for every base class present in `labels`.

    Thresholds are medians over valid pixels: tau_p of confidence, tau_e of entropy.
    Positives satisfy p > tau_p and H < tau_e, negatives p <= tau_p and H < tau_e.
    Each set keeps the K nodes nearest to the class mean feature; the prototype is the
    class mean plus Gaussian noise scaled by the class feature std.

    Args:
        features: (N, d) pixel features
        labels: (N,) class ids; ignore and unknown ids are skipped
        confidence: (N,) max softmax probability
        entropy: (N,) prediction entropy
        k: Nodes kept per (class, polarity)
        num_base: Number of base classes
        domain: Domain tag for the produced nodes

    Returns:
        NodeSet ordered by class, then positive/negative/prototype
    """
    n = features.shape[0]
    if labels.shape != (n,) or confidence.shape != (n,) or entropy.shape != (n,):
        raise ShapeMismatchError(
            f"features {tuple(features.shape)}, labels {tuple(labels.shape)}, p {tuple(confidence.shape)} "
            f"and H {tuple(entropy.shape)} disagree on the pixel count"
        )
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")

    valid = (labels != IGNORE_ID) & (labels >= 0) & (labels < num_base)
    parts = []
    if not valid.any():
        return NodeSet.empty(features.shape[1], features)

    tau_p = median(confidence[valid])
    tau_e = median(entropy[valid])
    certain = entropy < tau_e
    positive = valid & certain & (confidence > tau_p)
    negative = valid & certain & (confidence <= tau_p)

    for class_id in torch.unique(labels[valid]).tolist():
        members = labels == class_id
        center = features[members].mean(dim=0)
        for kind, mask in ((NodeKind.POSITIVE, positive), (NodeKind.NEGATIVE, negative)):
            chosen = nearest(features, torch.nonzero(members & mask).flatten(), center, k)
            if chosen.numel():
                parts.append(NodeSet.build(features[chosen], class_id, domain, kind, chosen))
        proto = prototype(features[members], center, noise, generator)
        parts.append(NodeSet.build(proto, class_id, domain, NodeKind.PROTOTYPE))
    return NodeSet.concat(parts)


def sample_novel_nodes(
    features: torch.Tensor,
    entropy: torch.Tensor,
    k: int,
    unknown_id: int,
    domain: Domain,
    noise: float = 0.1,
    generator: Optional[torch.Generator] = None,
    pixels: Optional[torch.Tensor] = None,
) -> NodeSet:
    """
    Positive/negative/prototype nodes for the unknown class.

    The candidates are split at the median entropy tau_m: H < tau_m is positive,
    H > tau_m negative. Both sets are truncated to the K nodes nearest to the mean of
    their union; with both sets empty the prototype falls back to the global mean.

    Args:
        features: (N, d) candidate pixel features, N >= 2
        entropy: (N,) prediction entropy
        pixels: (N,) original pixel index of each candidate (default: 0..N-1)
    """
    n = features.shape[0]
    if n < 2:
        raise InvalidInputError(f"Novel-node sampling needs at least 2 candidates, got {n}")
    if entropy.shape != (n,):
        raise ShapeMismatchError(f"entropy {tuple(entropy.shape)} does not match {n} features")
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    if pixels is None:
        pixels = torch.arange(n, device=features.device)

    tau_m = median(entropy)
    positive = entropy < tau_m
    negative = entropy > tau_m
    selected = positive | negative
    center = features[selected].mean(dim=0) if selected.any() else features.mean(dim=0)

    parts = []
    for kind, mask in ((NodeKind.POSITIVE, positive), (NodeKind.NEGATIVE, negative)):
        chosen = nearest(features, torch.nonzero(mask).flatten(), center, k)
        if chosen.numel():
            parts.append(NodeSet.build(features[chosen], unknown_id, domain, kind, pixels[chosen]))
    pool = features[selected] if selected.any() else features
    parts.append(NodeSet.build(prototype(pool, center, noise, generator), unknown_id, domain, NodeKind.PROTOTYPE))
    return NodeSet.concat(parts)
