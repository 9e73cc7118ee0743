"""
Procedural two-domain scene generator.

Scenes are composed in layers: a sky gradient, a ground plane, then shape instances
(rectangles, discs, triangles, and hexagons for the target-private class). The target
domain adds a style shift and the sinusoidal panoramic warp.
"""
import math
from typing import Dict, Tuple

import numpy as np

from ..models import IGNORE_ID, ClassStyle, DomainSpec
from .arrays import check_size
from .transforms import panoramic_warp


def class_ids(spec: DomainSpec) -> Dict[str, int]:
    """Label id for each palette entry; every private class maps to the unknown id."""
    ids: Dict[str, int] = {}
    for index, style in enumerate(spec.base_classes):
        ids[style.name] = index
    for style in spec.palette:
        if style.private:
            ids[style.name] = spec.unknown_id
    return ids


def sample_seed(seed: int, index: int) -> int:
    """Independent per-sample seed derived from the split seed."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _jitter(rng: np.random.Generator, color, amount: float = 0.08) -> np.ndarray:
    return np.clip(np.asarray(color) + rng.uniform(-amount, amount, 3), 0.0, 1.0)


def _shape_mask(
    style: ClassStyle,
    rng: np.random.Generator,
    yy: np.ndarray,
    xx: np.ndarray,
    horizon: int,
) -> np.ndarray:
    height, width = yy.shape
    if style.shape == "rectangle":
        w = rng.uniform(0.08, 0.2) * width
        h = rng.uniform(0.2, 0.5) * height
        x0 = rng.uniform(0, width - w)
        bottom = horizon + rng.uniform(0, 0.05) * height
        return (xx >= x0) & (xx < x0 + w) & (yy >= bottom - h) & (yy < bottom)
    if style.shape == "disc":
        r = rng.uniform(0.06, 0.12) * height
        cy = rng.uniform(min(horizon + r, height - r), height - r)
        cx = rng.uniform(r, width - r)
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= r ** 2
    if style.shape == "triangle":
        b = rng.uniform(0.06, 0.14) * width
        h = rng.uniform(0.15, 0.35) * height
        base = horizon + rng.uniform(0, 0.1) * height
        cx = rng.uniform(0, width)
        apex = base - h
        inside = (yy <= base) & (yy >= apex)
        return inside & (np.abs(xx - cx) <= 0.5 * b * (yy - apex) / h)
    if style.shape == "hexagon":
        # Fully inside the frame so at least the center pixel survives
        radius = min(rng.uniform(0.08, 0.14) * height, 0.4 * width)
        half_h = math.sqrt(3.0) / 2.0 * radius
        cx = rng.uniform(radius + 1, width - radius - 1)
        cy = rng.uniform(min(max(horizon, half_h + 1), height - half_h - 1), height - half_h - 1)
        dx = np.abs(xx - cx)
        dy = np.abs(yy - cy)
        return (dx <= radius) & (dy <= half_h) & (math.sqrt(3.0) * dx + dy <= math.sqrt(3.0) * radius)
    raise ValueError(f"No instance generator for shape {style.shape!r}")


def apply_style(image: np.ndarray, spec: DomainSpec) -> np.ndarray:
    """Weather-style shift: brightness offset, white fog blend, hue rotation."""
    out = np.clip(image + spec.brightness_offset, 0.0, 1.0)
    if spec.fog_weight > 0:
        out = (1.0 - spec.fog_weight) * out + spec.fog_weight
    if spec.hue_rotation:
        angle = math.radians(spec.hue_rotation)
        cos_a, sin_a = math.cos(angle), math.sin(angle)
        k = 1.0 / 3.0
        sq = math.sqrt(k)
        # Rotation about the gray axis (1, 1, 1) / sqrt(3)
        rot = np.array([
            [cos_a + (1 - cos_a) * k, k * (1 - cos_a) - sq * sin_a, k * (1 - cos_a) + sq * sin_a],
            [k * (1 - cos_a) + sq * sin_a, cos_a + k * (1 - cos_a), k * (1 - cos_a) - sq * sin_a],
            [k * (1 - cos_a) - sq * sin_a, k * (1 - cos_a) + sq * sin_a, cos_a + k * (1 - cos_a)],
        ])
        out = out @ rot.T
    return np.clip(out, 0.0, 1.0)


def generate_scene(seed: int, spec: DomainSpec, size: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Render one scene of the given domain.

    Args:
        seed: Scene seed; output is a pure function of (seed, spec, size)
        spec: Domain parameters
        size: (height, width), both even and >= 32

    Returns:
        (image HxWx3 float32 in [0, 1], label HxW uint8)

    Raises:
        InvalidInputError: If the size is odd or smaller than 32
    """
    height, width = check_size(size)
    rng = np.random.default_rng(seed)
    ids = class_ids(spec)

    image = np.zeros((height, width, 3), dtype=np.float64)
    label = np.full((height, width), IGNORE_ID, dtype=np.uint8)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64) + 0.5

    horizon = int(height * rng.uniform(0.35, 0.55))
    sky = next(s for s in spec.palette if s.shape == "sky")
    ground = next(s for s in spec.palette if s.shape == "ground")

    t = (np.arange(horizon, dtype=np.float64) / max(horizon, 1))[:, None, None]
    image[:horizon] = (1.0 - 0.35 * t) * _jitter(rng, sky.color, 0.05) + 0.35 * t
    label[:horizon] = ids[sky.name]

    depth = (np.arange(height - horizon, dtype=np.float64) / max(height - horizon, 1))[:, None, None]
    image[horizon:] = _jitter(rng, ground.color, 0.05) * (1.0 - 0.3 * depth)
    label[horizon:] = ids[ground.name]

    allow_private = spec.domain == "target" and spec.private_enabled
    for style in spec.palette:
        if style.shape in ("sky", "ground"):
            continue
        if style.private:
            if not allow_private:
                continue
            low = spec.min_private_instances
            count = int(rng.integers(low, max(style.max_instances, low) + 1))
        else:
            count = int(rng.integers(1, style.max_instances + 1)) if style.max_instances else 0
        for _ in range(count):
            mask = _shape_mask(style, rng, yy, xx, horizon)
            image[mask] = _jitter(rng, style.color)
            label[mask] = ids[style.name]

    image = np.clip(image + rng.normal(0.0, 0.015, image.shape), 0.0, 1.0)
    image = apply_style(image, spec).astype(np.float32)
    if spec.warp_amplitude > 0:
        image, label = panoramic_warp(image, label, spec.warp_amplitude)
    return image, label
