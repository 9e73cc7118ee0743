"""
Training: objective, schedule, metric logs, checkpoints and the engine.
"""
from .checkpoint import FORMAT_TAG, FORMAT_VERSION, checkpoint_config, load_checkpoint, save_checkpoint
from .engine import Trainer, restore_model
from .losses import mixup_loss, segmentation_loss, total_loss
from .metric_log import CsvMetricLog, MemoryMetricLog, MetricLog, create_metric_log
from .schedule import lr_schedule

__all__ = [
    "CsvMetricLog",
    "FORMAT_TAG",
    "FORMAT_VERSION",
    "MemoryMetricLog",
    "MetricLog",
    "Trainer",
    "checkpoint_config",
    "create_metric_log",
    "load_checkpoint",
    "lr_schedule",
    "mixup_loss",
    "restore_model",
    "save_checkpoint",
    "segmentation_loss",
    "total_loss",
]
