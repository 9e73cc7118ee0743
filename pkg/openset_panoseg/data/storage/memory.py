"""
In-memory dataset storage implementation.
"""
from typing import Dict, List, Tuple

import numpy as np

from .base import DatasetStorage
from ...exceptions import DatasetError
from ...models import DatasetMeta


class MemoryStorage(DatasetStorage):
    """In-memory dataset storage (for development/testing)."""

    def __init__(self):
        self._samples: Dict[str, Dict[int, Tuple[np.ndarray, np.ndarray]]] = {}
        self._meta: Dict[str, DatasetMeta] = {}

    def write_sample(self, split: str, index: int, image: np.ndarray, label: np.ndarray) -> None:
        self._samples.setdefault(split, {})[index] = (image.copy(), label.copy())

    def read_sample(self, split: str, index: int) -> Tuple[np.ndarray, np.ndarray]:
        try:
            image, label = self._samples[split][index]
        except KeyError:
            raise DatasetError(f"Missing sample: {self.locate(split, index)}")
        return image.copy(), label.copy()

    def write_meta(self, split: str, meta: DatasetMeta) -> None:
        self._meta[split] = meta.model_copy(deep=True)

    def read_meta(self, split: str) -> DatasetMeta:
        if split not in self._meta:
            raise DatasetError(f"Missing metadata: memory://{split}/meta.json")
        return self._meta[split].model_copy(deep=True)

    def clear_split(self, split: str) -> None:
        self._samples.pop(split, None)
        self._meta.pop(split, None)

    def list_samples(self, split: str) -> List[int]:
        return sorted(self._samples.get(split, {}))

    def locate(self, split: str, index: int) -> str:
        return f"memory://{split}/{index:05d}"

    def close(self) -> None:
        self._samples.clear()
        self._meta.clear()
