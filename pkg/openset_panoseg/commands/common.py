"""
Helpers shared by subcommands.
"""
from typing import Dict, List, Optional, Tuple

from ..data.dataset import SegmentationDataset, load_dataset
from ..exceptions import DatasetError, InvalidInputError

SOURCE_SPLIT = "source_train"
TARGET_SPLIT = "target_train"
VALIDATION_SPLIT = "target_val"


def parse_size(text: str) -> Tuple[int, int]:
    """Parse "HxW"."""
    try:
        height, width = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise InvalidInputError(f"Size must look like 64x128, got {text!r}")
    return height, width


def parse_overrides(pairs: Optional[List[str]]) -> Dict[str, str]:
    """Parse repeated `key=value` options."""
    overrides: Dict[str, str] = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise InvalidInputError(f"Expected key=value, got {pair!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def load_split(root: str, split: str, domain: str) -> SegmentationDataset:
    """Load a split and check that it holds the expected domain."""
    dataset = load_dataset(root, split)
    if dataset.meta.domain != domain:
        raise DatasetError(f"Split {split} under {root} holds {dataset.meta.domain} samples, expected {domain}")
    return dataset
