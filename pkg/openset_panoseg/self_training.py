"""
Self-training components: thresholded pseudo-labels, cross-domain class mixing and
rare-class sampling.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from .exceptions import InvalidInputError, ShapeMismatchError
from .models import IGNORE_ID

logger = logging.getLogger(__name__)


@dataclass
class PseudoLabel:
    labels: torch.Tensor    # (B, H, W) base ids, unknown id or ignore id
    weight: torch.Tensor    # (B,) fraction of non-ignore pixels above threshold


@dataclass
class MixResult:
    images: torch.Tensor        # (B, 3, H, W)
    labels: torch.Tensor        # (B, H, W)
    mask: torch.Tensor          # (B, H, W) True where the pixel comes from the source
    pixel_weight: torch.Tensor  # (B, H, W)
    degenerate: int = 0         # samples whose source crop had no valid class


def border_rows(height: int, top: float, bottom: float):
    return int(round(height * top)), int(round(height * bottom))


@torch.no_grad()
def pseudo_label(
    logits: torch.Tensor,
    num_base: int,
    threshold: float,
    border_top: float = 15 / 512,
    border_bottom: float = 120 / 512,
) -> PseudoLabel:
    """
    Teacher pseudo-labels with an unknown-class fallback.

    A pixel takes the best base class when its softmax probability (over all
    num_base + 1 channels) reaches `threshold`, otherwise the unknown id. The top and
    bottom border rows are set to the ignore id.

    Args:
        logits: (B, num_base + 1, H, W)
        threshold: In (0, 1)
        border_top, border_bottom: Fractions of the height ignored at each border
    """
    if not 0.0 < threshold < 1.0:
        raise InvalidInputError(f"Pseudo-label threshold must lie in (0, 1), got {threshold}")
    if logits.dim() != 4 or logits.shape[1] != num_base + 1:
        raise ShapeMismatchError(f"Expected (B, {num_base + 1}, H, W) logits, got {tuple(logits.shape)}")
    prob = torch.softmax(logits, dim=1)
    confidence, labels = prob[:, :num_base].max(dim=1)
    confident = confidence >= threshold
    labels = torch.where(confident, labels, torch.full_like(labels, num_base))

    height = labels.shape[1]
    top, bottom = border_rows(height, border_top, border_bottom)
    valid = torch.ones_like(confident)
    if top:
        valid[:, :top] = False
    if bottom:
        valid[:, height - bottom:] = False
    labels = torch.where(valid, labels, torch.full_like(labels, IGNORE_ID))

    counted = valid.flatten(1).sum(dim=1).clamp_min(1)
    weight = (confident & valid).flatten(1).sum(dim=1).to(logits.dtype) / counted.to(logits.dtype)
    return PseudoLabel(labels=labels, weight=weight)


def dacs_mix(
    source_images: torch.Tensor,
    source_labels: torch.Tensor,
    target_images: torch.Tensor,
    target_labels: torch.Tensor,
    target_weight: Optional[torch.Tensor] = None,
    generator: Optional[torch.Generator] = None,
) -> MixResult:
    """
    Paste the pixels of half (rounded up) of each source crop's classes onto the
    target crop.

    Mixed labels take source labels on the mask and pseudo-labels elsewhere. Pasted
    pixels weigh 1, the rest the target's pseudo-label weight.
    """
    if source_images.shape != target_images.shape or source_labels.shape != target_labels.shape:
        raise ShapeMismatchError(
            f"Source crop {tuple(source_images.shape)} and target crop {tuple(target_images.shape)} differ"
        )
    batch = source_labels.shape[0]
    if target_weight is None:
        target_weight = torch.ones(batch, dtype=source_images.dtype, device=source_images.device)

    masks = []
    degenerate = 0
    for b in range(batch):
        classes = torch.unique(source_labels[b])
        classes = classes[classes != IGNORE_ID]
        if classes.numel() == 0:
            degenerate += 1
            masks.append(torch.zeros_like(source_labels[b], dtype=torch.bool))
            continue
        chosen = classes[torch.randperm(classes.numel(), generator=generator)[: math.ceil(classes.numel() / 2)]]
        masks.append(torch.isin(source_labels[b], chosen))
    if degenerate:
        logger.warning("Class mix degenerated to the target pair for %d sample(s)", degenerate)

    mask = torch.stack(masks)
    images = torch.where(mask.unsqueeze(1), source_images, target_images)
    labels = torch.where(mask, source_labels, target_labels)
    weight = torch.where(
        mask,
        torch.ones((), dtype=source_images.dtype, device=mask.device),
        target_weight.view(-1, 1, 1).to(source_images.dtype).expand_as(mask),
    )
    return MixResult(images=images, labels=labels, mask=mask, pixel_weight=weight, degenerate=degenerate)


def class_sampling_probs(counts: np.ndarray, temperature: float) -> np.ndarray:
    """softmax(-freq / temperature) over classes, freq = class share of all labeled pixels."""
    if not temperature > 0:
        raise InvalidInputError(f"Temperature must be > 0, got {temperature}")
    totals = counts.sum(axis=0).astype(np.float64)
    freq = totals / max(totals.sum(), 1.0)
    scores = -freq / temperature
    scores -= scores.max()
    probs = np.exp(scores)
    return probs / probs.sum()


def rare_class_sample(counts: np.ndarray, temperature: float, min_pixels: int) -> np.ndarray:
    """
    Per-image sampling weights that favour images containing rare classes.

    A class is present in an image when it covers at least `min_pixels` pixels. An
    image's weight is the largest class probability among its present classes.

    Args:
        counts: (N, C) per-image class pixel counts
        temperature: Softmax temperature
        min_pixels: Presence threshold

    Returns:
        (N,) weights summing to 1

    Raises:
        InvalidInputError: If there are no images
    """
    counts = np.asarray(counts)
    if counts.ndim != 2 or counts.shape[0] == 0:
        raise InvalidInputError("Rare-class sampling needs class statistics for at least one image")
    probs = class_sampling_probs(counts, temperature)
    present = counts >= max(min_pixels, 1)
    weights = np.where(present, probs[None, :], 0.0).max(axis=1)
    if weights.sum() <= 0:
        logger.warning("No image reaches %d pixels of any class; sampling uniformly", min_pixels)
        weights = np.ones(counts.shape[0])
    return weights / weights.sum()
