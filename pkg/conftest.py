import os

import hypothesis
import pytest
import torch

from openset_panoseg.data import write_dataset
from openset_panoseg.data.storage import create_storage
from openset_panoseg.models import source_spec, target_spec

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "fast"))

torch.set_num_threads(1)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow end-to-end tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end training runs (enable with --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def memory_storage():
    storage = create_storage("memory")
    yield storage
    storage.close()


@pytest.fixture
def tiny_benchmark(tmp_path):
    """Three small splits on disk: 6 source, 6 target, 3 validation images of 32x64."""
    root = tmp_path / "data"
    target = target_spec()
    write_dataset(str(root), "source_train", source_spec(), 6, size=(32, 64), seed=0)
    write_dataset(str(root), "target_train", target, 6, size=(32, 64), seed=1)
    write_dataset(str(root), "target_val", target, 3, size=(32, 64), seed=2)
    return root


@pytest.fixture
def tiny_overrides():
    """Config overrides small enough for a handful of CPU steps."""
    return {
        "feature_dim": 16,
        "attention_heads": 2,
        "attention_blocks": 1,
        "nodes_per_class": 2,
        "sinkhorn_iters": 5,
        "crop_height": 32,
        "crop_width": 32,
        "batch_size": 2,
        "warmup_steps": 2,
        "total_steps": 6,
        "eval_interval": 3,
        "log_interval": 1,
        "lr": 1e-3,
    }
