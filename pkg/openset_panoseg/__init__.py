"""
openset_panoseg - open-set domain-adaptive panoramic segmentation at desk scale
"""
from .config import TrainConfig, get_config, load_config
from .models import DomainSpec, MetricsReport, source_spec, target_spec

__version__ = "1.0.0"

__all__ = [
    "DomainSpec",
    "MetricsReport",
    "TrainConfig",
    "get_config",
    "load_config",
    "source_spec",
    "target_spec",
]
