"""
Validation helpers for image and label arrays.
"""
from typing import List, Tuple

import numpy as np

from ..exceptions import InvalidInputError
from ..models import IGNORE_ID


def check_size(size: Tuple[int, int]) -> Tuple[int, int]:
    """Reject sizes that are odd or smaller than 32 pixels."""
    height, width = (int(s) for s in size)
    if height < 32 or width < 32 or height % 2 or width % 2:
        raise InvalidInputError(
            f"Image size must be even and at least 32x32, got {height}x{width}"
        )
    return height, width


def check_image(image: np.ndarray) -> np.ndarray:
    """Reject images that are not HxWx3 with finite values in [0, 1]."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise InvalidInputError(f"Image must be HxWx3, got shape {image.shape}")
    if not np.all(np.isfinite(image)) or image.min() < 0.0 or image.max() > 1.0:
        raise InvalidInputError("Image values must be finite and within [0, 1]")
    return image


def check_pair(image: np.ndarray, label: np.ndarray) -> None:
    if image.shape[:2] != label.shape:
        raise InvalidInputError(
            f"Image {image.shape[:2]} and label {label.shape} are not pixel-aligned"
        )


def invalid_label_ids(label: np.ndarray, num_base: int, allow_unknown: bool) -> List[int]:
    """Ids present in `label` that fall outside the allowed label space."""
    allowed = set(range(num_base)) | {IGNORE_ID}
    if allow_unknown:
        allowed.add(num_base)
    return sorted(int(v) for v in np.unique(label) if int(v) not in allowed)


def quantize_image(image: np.ndarray) -> np.ndarray:
    """Float image in [0, 1] to the 8-bit representation stored on disk."""
    return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)


def dequantize_image(image: np.ndarray) -> np.ndarray:
    return image.astype(np.float32) / 255.0

