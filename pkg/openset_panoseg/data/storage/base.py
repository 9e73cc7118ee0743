"""
Abstract base class for dataset storage.
"""
from abc import ABC, abstractmethod
from typing import List, Tuple

import numpy as np

from ...models import DatasetMeta


class DatasetStorage(ABC):
    """Abstract base class for dataset storage implementations."""

    @abstractmethod
    def write_sample(self, split: str, index: int, image: np.ndarray, label: np.ndarray) -> None:
        """
        Store one sample.

        Args:
            split: Split name
            index: Sample index within the split
            image: HxWx3 uint8 image
            label: HxW uint8 label map
        """
        pass

    @abstractmethod
    def read_sample(self, split: str, index: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Read one sample.

        Returns:
            (HxWx3 uint8 image, HxW uint8 label map)

        Raises:
            DatasetError: If the sample is missing or unreadable
        """
        pass

    @abstractmethod
    def write_meta(self, split: str, meta: DatasetMeta) -> None:
        """Store split metadata."""
        pass

    @abstractmethod
    def read_meta(self, split: str) -> DatasetMeta:
        """
        Read split metadata.

        Raises:
            DatasetError: If metadata is missing or invalid
        """
        pass

    @abstractmethod
    def clear_split(self, split: str) -> None:
        """Remove every sample and the metadata of a split (no-op if absent)."""
        pass

    @abstractmethod
    def list_samples(self, split: str) -> List[int]:
        """Sorted sample indices present in a split."""
        pass

    @abstractmethod
    def locate(self, split: str, index: int) -> str:
        """Human-readable location of a sample, used in diagnostics."""
        pass

    def close(self) -> None:
        """Release resources (no-op by default)."""
        pass
