"""
Path utilities for dataset splits, checkpoints and reports.
"""
import os
import re
import tempfile
from pathlib import Path
from typing import Callable, Union

from .exceptions import InvalidInputError, StorageError

PathLike = Union[str, os.PathLike]


def validate_split(split: str) -> str:
    """
    Validate a split name.

    Args:
        split: Split identifier such as "source_train"

    Returns:
        Validated split name

    Raises:
        InvalidInputError: If the name is empty or would escape the dataset root
    """
    if not split:
        raise InvalidInputError("split cannot be empty")

    if not re.match(r'^[a-zA-Z0-9_-]+$', split):
        raise InvalidInputError(
            f"split must contain only alphanumeric characters, underscores, or hyphens: {split!r}"
        )

    if len(split) > 64:
        raise InvalidInputError("split name too long (max 64 characters)")

    return split


def ensure_directory(path: PathLike, auto_create: bool = True) -> Path:
    """
    Ensure directory exists.

    Raises:
        StorageError: If the path is a file or creation fails
    """
    path = Path(path)
    if path.exists():
        if path.is_dir():
            return path
        raise StorageError(f"Path exists but is not a directory: {path}")

    if not auto_create:
        raise StorageError(f"Directory does not exist: {path}")
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"Failed to create directory {path}: {e}")
    return path


def atomic_write(path: PathLike, writer: Callable[[str], None]) -> Path:
    """
    Write a file via a temporary sibling and rename it into place.

    Args:
        path: Final destination
        writer: Callback that writes the full content to the given temporary path

    Returns:
        Final path
    """
    path = Path(path)
    ensure_directory(path.parent)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    def _write(tmp: str) -> None:
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(text)
    return atomic_write(path, _write)
