"""
Dataset generation, persistence and loading.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple, Union

import numpy as np
import torch
from torch.utils.data import Dataset
from tqdm import tqdm

from ..exceptions import DatasetError, InvalidInputError
from ..models import IGNORE_ID, DatasetMeta, DomainSpec
from .arrays import check_size, dequantize_image, invalid_label_ids, quantize_image
from .storage import DatasetStorage, create_storage
from .synthetic import generate_scene, sample_seed

logger = logging.getLogger(__name__)

DEFAULT_SIZE = (64, 128)


class SegmentationDataset(Dataset):
    """
    A loaded split held in memory as 8-bit arrays.

    Items are (image HxWx3 float32 in [0, 1], label HxW int64).
    """

    def __init__(self, images: np.ndarray, labels: np.ndarray, meta: DatasetMeta):
        if len(images) != len(labels):
            raise DatasetError(f"{len(images)} images but {len(labels)} labels in split {meta.split}")
        self.images = images
        self.labels = labels
        self.meta = meta

    def __len__(self) -> int:
        return len(self.images)

    def __getitem__(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        return dequantize_image(self.images[index]), self.labels[index].astype(np.int64)

    @property
    def num_base(self) -> int:
        return self.meta.num_base

    @property
    def size(self) -> Tuple[int, int]:
        return self.meta.height, self.meta.width

    def class_pixel_counts(self) -> np.ndarray:
        """Per-image pixel count of every base class, shape (N, num_base)."""
        counts = np.zeros((len(self), self.num_base), dtype=np.int64)
        for i, label in enumerate(self.labels):
            flat = label.reshape(-1).astype(np.int64)
            flat = flat[flat < self.num_base]
            counts[i] = np.bincount(flat, minlength=self.num_base)
        return counts


def _as_storage(target: Union[str, DatasetStorage]) -> DatasetStorage:
    if isinstance(target, DatasetStorage):
        return target
    return create_storage("png", root=str(target))


def generate_split(
    spec: DomainSpec,
    count: int,
    size: Tuple[int, int] = DEFAULT_SIZE,
    seed: int = 0,
    workers: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """Render `count` scenes as stacked uint8 arrays. Generation order never affects output."""
    size = check_size(size)
    if count < 0:
        raise InvalidInputError(f"count must be >= 0, got {count}")

    def _render(index: int) -> Tuple[np.ndarray, np.ndarray]:
        image, label = generate_scene(sample_seed(seed, index), spec, size)
        return quantize_image(image), label

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(tqdm(
            pool.map(_render, range(count)),
            total=count,
            desc=f"render {spec.domain}",
            disable=not logger.isEnabledFor(logging.INFO),
            leave=False,
        ))
    images = np.stack([r[0] for r in results]) if results else np.zeros((0, *size, 3), np.uint8)
    labels = np.stack([r[1] for r in results]) if results else np.zeros((0, *size), np.uint8)
    return images, labels


def write_dataset(
    root: Union[str, DatasetStorage],
    split: str,
    spec: DomainSpec,
    count: int,
    size: Tuple[int, int] = DEFAULT_SIZE,
    seed: int = 0,
    workers: int = 1,
) -> SegmentationDataset:
    """
    Generate a split and persist it.

    Args:
        root: Dataset root directory or a storage backend
        split: Split name, e.g. "source_train"
        spec: Domain parameters
        count: Number of samples
        size: (height, width)
        seed: Split seed
        workers: Threads used for rendering

    Returns:
        The written split, loaded in memory
    """
    storage = _as_storage(root)
    images, labels = generate_split(spec, count, size, seed, workers)
    storage.clear_split(split)
    for index, (image, label) in enumerate(zip(images, labels)):
        storage.write_sample(split, index, image, label)

    meta = DatasetMeta(
        class_names=spec.class_names,
        num_base=spec.num_base,
        unknown_id=spec.unknown_id,
        ignore_id=IGNORE_ID,
        spec=spec.model_dump(mode="json"),
        split=split,
        count=count,
        seed=seed,
        height=size[0],
        width=size[1],
    )
    storage.write_meta(split, meta)
    logger.info("Wrote %d %s samples to split %s", count, spec.domain, split)
    return SegmentationDataset(images, labels, meta)


def _check_meta(meta: DatasetMeta, spec: Optional[DomainSpec], split: str) -> None:
    if spec is None:
        return
    if meta.num_base != spec.num_base or meta.class_names != spec.class_names:
        raise DatasetError(
            f"Split {split}: metadata declares {meta.num_base} base classes {meta.class_names}, "
            f"expected {spec.num_base} {spec.class_names}"
        )
    if meta.domain != spec.domain:
        raise DatasetError(f"Split {split} holds {meta.domain} samples, expected {spec.domain}")


def load_dataset(
    root: Union[str, DatasetStorage],
    split: str,
    spec: Optional[DomainSpec] = None,
    count: Optional[int] = None,
) -> SegmentationDataset:
    """
    Load and validate a split.

    Args:
        root: Dataset root directory or a storage backend
        split: Split name
        spec: Expected domain spec; None skips the comparison
        count: Load only the first `count` samples

    Returns:
        SegmentationDataset

    Raises:
        DatasetError: On missing/corrupt files, metadata mismatch, or label ids
            outside the split's label space
    """
    storage = _as_storage(root)
    meta = storage.read_meta(split)
    _check_meta(meta, spec, split)

    indices = storage.list_samples(split)
    if indices != list(range(meta.count)):
        raise DatasetError(
            f"Split {split}: metadata lists {meta.count} samples, found {len(indices)} "
            f"(first missing: {storage.locate(split, _first_gap(indices))})"
        )
    if count is not None:
        if count > meta.count:
            raise DatasetError(f"Split {split} has {meta.count} samples, {count} requested")
        indices = indices[:count]

    allow_unknown = meta.domain == "target"
    images: List[np.ndarray] = []
    labels: List[np.ndarray] = []
    for index in indices:
        image, label = storage.read_sample(split, index)
        if image.shape != (meta.height, meta.width, 3) or label.shape != (meta.height, meta.width):
            raise DatasetError(
                f"{storage.locate(split, index)}: shape {image.shape}/{label.shape} "
                f"does not match metadata {meta.height}x{meta.width}"
            )
        bad = invalid_label_ids(label, meta.num_base, allow_unknown)
        if bad:
            raise DatasetError(
                f"{storage.locate(split, index)}: invalid label ids {bad} for {meta.domain} split"
            )
        images.append(image)
        labels.append(label)

    size = (meta.height, meta.width)
    return SegmentationDataset(
        np.stack(images) if images else np.zeros((0, *size, 3), np.uint8),
        np.stack(labels) if labels else np.zeros((0, *size), np.uint8),
        meta,
    )


def _first_gap(indices: List[int]) -> int:
    for expected, actual in enumerate(indices):
        if expected != actual:
            return expected
    return len(indices)


def to_tensors(images: np.ndarray, labels: np.ndarray, dtype: torch.dtype = torch.float32):
    """Stack float HxWx3 images and HxW labels into (B,3,H,W) and (B,H,W) tensors."""
    image_t = torch.from_numpy(np.ascontiguousarray(images)).permute(0, 3, 1, 2).to(dtype)
    label_t = torch.from_numpy(np.ascontiguousarray(labels)).long()
    return image_t, label_t
