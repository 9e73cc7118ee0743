"""
PNG dataset storage implementation.

Layout: root/{split}/{images,labels}/NNNNN.png plus root/{split}/meta.json.
"""
import json
from pathlib import Path
from typing import List, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError
from pydantic import ValidationError

from .base import DatasetStorage
from ...exceptions import DatasetError
from ...models import DatasetMeta
from ...paths import atomic_write, atomic_write_text, validate_split


class PngStorage(DatasetStorage):
    """Dataset storage on disk: 8-bit RGB images and single-channel label PNGs."""

    def __init__(self, root: str):
        """
        Initialize PNG storage.

        Args:
            root: Dataset root directory
        """
        self.root = Path(root)

    def _split_dir(self, split: str) -> Path:
        return self.root / validate_split(split)

    def _image_path(self, split: str, index: int) -> Path:
        return self._split_dir(split) / "images" / f"{index:05d}.png"

    def _label_path(self, split: str, index: int) -> Path:
        return self._split_dir(split) / "labels" / f"{index:05d}.png"

    def write_sample(self, split: str, index: int, image: np.ndarray, label: np.ndarray) -> None:
        rgb = Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8))
        gray = Image.fromarray(np.ascontiguousarray(label, dtype=np.uint8))
        atomic_write(self._image_path(split, index), lambda tmp: rgb.save(tmp, format="PNG"))
        atomic_write(self._label_path(split, index), lambda tmp: gray.save(tmp, format="PNG"))

    @staticmethod
    def _read_png(path: Path, mode: str) -> np.ndarray:
        if not path.is_file():
            raise DatasetError(f"Missing file: {path}")
        try:
            with Image.open(path) as img:
                img.load()
                if img.mode != mode:
                    raise DatasetError(f"Unexpected PNG mode {img.mode!r} (want {mode!r}): {path}")
                return np.array(img, dtype=np.uint8)
        except (UnidentifiedImageError, OSError, SyntaxError) as e:
            raise DatasetError(f"Corrupt image file {path}: {e}")

    def read_sample(self, split: str, index: int) -> Tuple[np.ndarray, np.ndarray]:
        image = self._read_png(self._image_path(split, index), "RGB")
        label = self._read_png(self._label_path(split, index), "L")
        return image, label

    def write_meta(self, split: str, meta: DatasetMeta) -> None:
        text = json.dumps(meta.model_dump(mode="json"), indent=2, sort_keys=True)
        atomic_write_text(self._split_dir(split) / "meta.json", text + "\n")

    def read_meta(self, split: str) -> DatasetMeta:
        path = self._split_dir(split) / "meta.json"
        if not path.is_file():
            raise DatasetError(f"Missing file: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                return DatasetMeta(**json.load(f))
        except (json.JSONDecodeError, TypeError) as e:
            raise DatasetError(f"Corrupt metadata {path}: {e}")
        except ValidationError as e:
            raise DatasetError(f"Invalid metadata {path}: {e}")

    def clear_split(self, split: str) -> None:
        split_dir = self._split_dir(split)
        for sub in ("images", "labels"):
            for path in (split_dir / sub).glob("*.png"):
                path.unlink()
        (split_dir / "meta.json").unlink(missing_ok=True)

    def list_samples(self, split: str) -> List[int]:
        image_dir = self._split_dir(split) / "images"
        if not image_dir.is_dir():
            return []
        indices = []
        for path in image_dir.glob("*.png"):
            if path.stem.isdigit():
                indices.append(int(path.stem))
        return sorted(indices)

    def locate(self, split: str, index: int) -> str:
        return str(self._label_path(split, index))
