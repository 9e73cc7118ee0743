"""
Geometric transforms shared by the scene generator and the training loop.
"""
from typing import Tuple

import numpy as np

from ..exceptions import InvalidInputError
from .arrays import check_image, check_pair

MAX_WARP_AMPLITUDE = 0.25

# ImageNet statistics, applied inside the model
IMAGE_MEAN = (123.675 / 255.0, 116.28 / 255.0, 103.53 / 255.0)
IMAGE_STD = (58.395 / 255.0, 57.12 / 255.0, 57.375 / 255.0)


def column_displacement(x, height: int, width: int, amplitude: float):
    """Vertical shift (pixels) of column `x`; periodic in x with period `width`."""
    return amplitude * height * np.sin(2.0 * np.pi * np.asarray(x, dtype=np.float64) / width)


def _check_amplitude(amplitude: float) -> float:
    if not np.isfinite(amplitude) or not 0.0 <= amplitude <= MAX_WARP_AMPLITUDE:
        raise InvalidInputError(
            f"Warp amplitude must lie in [0, {MAX_WARP_AMPLITUDE}], got {amplitude}"
        )
    return float(amplitude)


def _warp(image: np.ndarray, label: np.ndarray, amplitude: float) -> Tuple[np.ndarray, np.ndarray]:
    check_image(image)
    check_pair(image, label)
    if amplitude == 0.0:
        return image.copy(), label.copy()

    height, width = label.shape
    cols = np.arange(width)[None, :]
    shift = column_displacement(np.arange(width), height, width, amplitude)
    src = np.arange(height, dtype=np.float64)[:, None] - shift[None, :]

    # Rows wrap around vertically, so every column is a cyclic shift of itself.
    nearest = np.floor(src + 0.5).astype(np.int64) % height
    out_label = label[nearest, cols]

    y0 = np.floor(src)
    frac = (src - y0)[..., None]
    y0 = y0.astype(np.int64)
    upper = image[y0 % height, cols].astype(np.float64)
    lower = image[(y0 + 1) % height, cols].astype(np.float64)
    out_image = ((1.0 - frac) * upper + frac * lower).astype(image.dtype)
    return out_image, out_label


def panoramic_warp(image: np.ndarray, label: np.ndarray, amplitude: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Displace every column vertically by amplitude*H*sin(2*pi*x/W).

    Labels are resampled nearest-neighbor, the image bilinearly. The displacement is
    periodic in x, so the left and right image edges join seamlessly.

    Raises:
        InvalidInputError: If amplitude is outside [0, 0.25] or the image is not finite in [0, 1]
    """
    return _warp(image, label, _check_amplitude(amplitude))


def inverse_panoramic_warp(image: np.ndarray, label: np.ndarray, amplitude: float) -> Tuple[np.ndarray, np.ndarray]:
    """Undo `panoramic_warp` with the same amplitude."""
    return _warp(image, label, -_check_amplitude(amplitude))


def random_crop(
    image: np.ndarray,
    label: np.ndarray,
    crop: Tuple[int, int],
    seed: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Aligned crop of image and label at a uniformly drawn offset.

    Raises:
        InvalidInputError: If the crop is larger than the image or the image is not finite in [0, 1]
    """
    check_image(image)
    check_pair(image, label)
    height, width = label.shape
    crop_h, crop_w = crop
    if crop_h > height or crop_w > width or crop_h < 1 or crop_w < 1:
        raise InvalidInputError(f"Crop {crop_h}x{crop_w} does not fit image {height}x{width}")
    top, left = crop_offset((height, width), crop, seed)
    return (
        image[top:top + crop_h, left:left + crop_w].copy(),
        label[top:top + crop_h, left:left + crop_w].copy(),
    )


def crop_offset(size: Tuple[int, int], crop: Tuple[int, int], seed: int) -> Tuple[int, int]:
    rng = np.random.default_rng(seed)
    top = int(rng.integers(0, size[0] - crop[0] + 1))
    left = int(rng.integers(0, size[1] - crop[1] + 1))
    return top, left


def hflip(image: np.ndarray, label: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return image[:, ::-1].copy(), label[:, ::-1].copy()
