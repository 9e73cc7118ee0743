"""
Synthetic two-domain benchmark: scene generation, persistence and batching.
"""
from .batching import CropBatcher
from .dataset import (
    DEFAULT_SIZE,
    SegmentationDataset,
    generate_split,
    load_dataset,
    to_tensors,
    write_dataset,
)
from .synthetic import generate_scene, sample_seed
from .transforms import inverse_panoramic_warp, panoramic_warp, random_crop

__all__ = [
    "CropBatcher",
    "DEFAULT_SIZE",
    "SegmentationDataset",
    "generate_scene",
    "generate_split",
    "inverse_panoramic_warp",
    "load_dataset",
    "panoramic_warp",
    "random_crop",
    "sample_seed",
    "to_tensors",
    "write_dataset",
]
