"""
Dataset storage implementations.
"""
from typing import Literal, Optional

from .base import DatasetStorage
from .memory import MemoryStorage
from .png import PngStorage


def create_storage(
    storage_type: Literal["memory", "png"],
    root: Optional[str] = None,
) -> DatasetStorage:
    """
    Create a dataset storage instance.

    Args:
        storage_type: Type of storage ("memory" or "png")
        root: Dataset root directory (png only)

    Returns:
        DatasetStorage instance
    """
    if storage_type == "memory":
        return MemoryStorage()
    elif storage_type == "png":
        if root is None:
            raise ValueError("png storage needs a root directory")
        return PngStorage(root=root)
    else:
        raise ValueError(f"Unknown storage type: {storage_type}")


__all__ = [
    "DatasetStorage",
    "MemoryStorage",
    "PngStorage",
    "create_storage",
]
