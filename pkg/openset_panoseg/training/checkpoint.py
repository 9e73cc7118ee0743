"""
Versioned training checkpoints.
"""
import logging
import pickle
import zipfile
from typing import Any, Dict, Optional

import torch
from pydantic import ValidationError

from ..config import TrainConfig, config_hash, diff_config
from ..exceptions import CheckpointError
from ..paths import PathLike, atomic_write

logger = logging.getLogger(__name__)

FORMAT_TAG = "openset-panoseg-checkpoint"
FORMAT_VERSION = 1

REQUIRED_KEYS = (
    "format", "version", "config_hash", "config", "step", "num_base", "class_names",
    "model", "teacher", "adapter", "optimizer", "rng",
)


def save_checkpoint(path: PathLike, state: Dict[str, Any]) -> None:
    """
    Write a checkpoint atomically.

    Args:
        path: Destination file
        state: Training state; format tag and version are added here
    """
    missing = [k for k in REQUIRED_KEYS if k not in ("format", "version") and k not in state]
    if missing:
        raise CheckpointError(f"Checkpoint state is missing {missing}")
    payload = dict(state, format=FORMAT_TAG, version=FORMAT_VERSION)
    atomic_write(path, lambda tmp: torch.save(payload, tmp))
    logger.info("Saved checkpoint at step %d to %s", state["step"], path)


def load_checkpoint(path: PathLike, expected: Optional[TrainConfig] = None) -> Dict[str, Any]:
    """
    Read and validate a checkpoint.

    Args:
        path: Checkpoint file
        expected: If given, the stored config hash must match this configuration

    Returns:
        The stored state dictionary

    Raises:
        CheckpointError: On missing, truncated or corrupt files, a foreign format or
            version, or a config-hash mismatch (both hashes and divergent keys named)
    """
    try:
        state = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise CheckpointError(f"Checkpoint not found: {path}")
    except (RuntimeError, EOFError, OSError, pickle.UnpicklingError, zipfile.BadZipFile, ValueError) as e:
        raise CheckpointError(f"Corrupt or truncated checkpoint {path}: {e}")

    if not isinstance(state, dict) or state.get("format") != FORMAT_TAG:
        raise CheckpointError(f"{path} is not an openset_panoseg checkpoint")
    if state.get("version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {state.get('version')} is not supported (expected {FORMAT_VERSION})"
        )
    missing = [k for k in REQUIRED_KEYS if k not in state]
    if missing:
        raise CheckpointError(f"{path}: checkpoint is missing {missing}")

    if expected is not None:
        current = config_hash(expected)
        if state["config_hash"] != current:
            keys = diff_config(state["config"], expected.model_dump(mode="json"))
            raise CheckpointError(
                f"{path}: config hash mismatch (checkpoint {state['config_hash']}, current {current}); "
                f"divergent keys: {', '.join(keys) or 'none'}"
            )
    return state


def checkpoint_config(state: Dict[str, Any]) -> TrainConfig:
    """Rebuild the TrainConfig stored in a checkpoint."""
    try:
        return TrainConfig.model_validate(state["config"])
    except ValidationError as e:
        raise CheckpointError(f"Stored configuration is invalid: {e}")
