"""
Crop batches for training.
"""
from typing import Optional, Tuple

import numpy as np
import torch

from ..exceptions import InvalidInputError
from .dataset import SegmentationDataset, to_tensors
from .transforms import hflip, random_crop


class CropBatcher:
    """
    Draws random crops from a split, driven by a dedicated torch.Generator.

    All randomness (image choice, crop seed, flip) comes from `generator`, so the
    batch sequence is reproducible and its state can be checkpointed.
    """

    def __init__(
        self,
        dataset: SegmentationDataset,
        crop: Tuple[int, int],
        batch_size: int,
        generator: torch.Generator,
        weights: Optional[np.ndarray] = None,
        flip: bool = False,
        dtype: torch.dtype = torch.float32,
    ):
        if len(dataset) == 0:
            raise InvalidInputError(f"Split {dataset.meta.split} is empty")
        height, width = dataset.size
        if crop[0] > height or crop[1] > width:
            raise InvalidInputError(f"Crop {crop} does not fit images of size {height}x{width}")
        if weights is not None:
            weights = np.asarray(weights, dtype=np.float64)
            if weights.shape != (len(dataset),) or not np.all(np.isfinite(weights)) or weights.sum() <= 0:
                raise InvalidInputError("Sampling weights must be finite, nonnegative, one per image")
            self.weights = torch.from_numpy(weights)
        else:
            self.weights = None
        self.dataset = dataset
        self.crop = crop
        self.batch_size = batch_size
        self.generator = generator
        self.flip = flip
        self.dtype = dtype

    def _indices(self) -> torch.Tensor:
        if self.weights is not None:
            return torch.multinomial(self.weights, self.batch_size, replacement=True, generator=self.generator)
        return torch.randint(len(self.dataset), (self.batch_size,), generator=self.generator)

    def next_batch(self) -> Tuple[torch.Tensor, torch.Tensor]:
        """Return (B,3,h,w) images in [0, 1] and (B,h,w) int64 labels."""
        images, labels = [], []
        for index in self._indices().tolist():
            seed = int(torch.randint(2 ** 31 - 1, (1,), generator=self.generator))
            do_flip = bool(torch.rand(1, generator=self.generator) < 0.5)
            image, label = self.dataset[index]
            image, label = random_crop(image, label, self.crop, seed)
            if self.flip and do_flip:
                image, label = hflip(image, label)
            images.append(image)
            labels.append(label)
        return to_tensors(np.stack(images), np.stack(labels), self.dtype)
