"""
Open-set segmentation metrics and full-resolution evaluation.
"""
import csv
import io
import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Union

import numpy as np
import torch

from .data.dataset import SegmentationDataset, to_tensors
from .exceptions import InvalidInputError, ShapeMismatchError
from .models import IGNORE_ID, MetricsReport
from .paths import PathLike, atomic_write_text, ensure_directory

logger = logging.getLogger(__name__)


def accumulate_confusion(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> np.ndarray:
    """
    Confusion counts [gt, pred] over pixels whose ground truth is not the ignore id.

    Raises:
        ShapeMismatchError: If pred and gt differ in shape
        InvalidInputError: If an id falls outside 0..num_classes-1
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatchError(f"Prediction {pred.shape} and ground truth {gt.shape} differ")
    keep = gt != IGNORE_ID
    g = gt[keep].astype(np.int64)
    p = pred[keep].astype(np.int64)
    if g.size and (g.min() < 0 or g.max() >= num_classes):
        raise InvalidInputError(f"Ground-truth ids {sorted(set(np.unique(g)) - set(range(num_classes)))} out of range")
    if p.size and (p.min() < 0 or p.max() >= num_classes):
        raise InvalidInputError(f"Predicted ids {sorted(set(np.unique(p)) - set(range(num_classes)))} out of range")
    return np.bincount(g * num_classes + p, minlength=num_classes ** 2).reshape(num_classes, num_classes)


class ConfusionMatrix:
    """(C_b + 1) x (C_b + 1) pixel counts, rows ground truth, columns prediction."""

    def __init__(self, num_classes: int):
        self.num_classes = num_classes
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    def add(self, pred: np.ndarray, gt: np.ndarray) -> "ConfusionMatrix":
        self.counts += accumulate_confusion(pred, gt, self.num_classes)
        return self

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def h_score(common: float, private: float) -> float:
    """Harmonic mean of Common mIoU and Private IoU; 0 if either is 0."""
    if common <= 0.0 or private <= 0.0:
        return 0.0
    return 2.0 * common * private / (common + private)


def compute_metrics(
    cm: Union[ConfusionMatrix, np.ndarray],
    class_names: Optional[List[str]] = None,
    step: int = 0,
    config_hash: str = "",
) -> MetricsReport:
    """
    Per-class IoU, Common mIoU over base classes, Private IoU of the unknown class
    (the last row/column) and their H-score, in percent.

    Base classes with no ground truth and no prediction are left out of the Common
    mean and listed in `excluded_classes`.

    Raises:
        InvalidInputError: If the confusion matrix is empty
    """
    counts = cm.counts if isinstance(cm, ConfusionMatrix) else np.asarray(cm, dtype=np.int64)
    num_classes = counts.shape[0]
    if counts.sum() == 0:
        raise InvalidInputError("Cannot compute metrics from an empty confusion matrix")
    names = class_names or [f"class_{i}" for i in range(num_classes - 1)] + ["unknown"]
    if len(names) != num_classes:
        raise ShapeMismatchError(f"{len(names)} class names for a {num_classes}-class confusion matrix")

    tp = np.diag(counts).astype(np.float64)
    union = counts.sum(axis=0) + counts.sum(axis=1) - np.diag(counts)
    iou: List[Optional[float]] = [
        100.0 * tp[c] / union[c] if union[c] > 0 else None for c in range(num_classes)
    ]

    base = [v for v in iou[:-1] if v is not None]
    excluded = [names[c] for c in range(num_classes - 1) if iou[c] is None]
    common_defined = bool(base)
    common = float(np.mean(base)) if base else 0.0
    private = iou[-1] if iou[-1] is not None else 0.0
    defined = [v for v in iou if v is not None]
    if excluded:
        logger.info("Classes absent from prediction and ground truth: %s", excluded)

    return MetricsReport(
        per_class_iou=dict(zip(names, iou)),
        common=common,
        private=private,
        h_score=h_score(common, private),
        miou=float(np.mean(defined)) if defined else 0.0,
        pixels=int(counts.sum()),
        step=step,
        config_hash=config_hash,
        common_defined=common_defined,
        excluded_classes=excluded,
    )


@torch.no_grad()
def predict(model: torch.nn.Module, images: torch.Tensor) -> torch.Tensor:
    """Argmax over all C_b + 1 channels at input resolution."""
    return model(images).logits.argmax(dim=1)


@torch.no_grad()
def evaluate(
    model: torch.nn.Module,
    dataset: SegmentationDataset,
    batch_size: int = 4,
    step: int = 0,
    config_hash: str = "",
) -> MetricsReport:
    """
    Single-pass full-resolution evaluation; the model is left in its previous mode.

    Raises:
        InvalidInputError: If the model's class count does not match the dataset
    """
    if model.num_classes != dataset.num_base + 1:
        raise InvalidInputError(
            f"Model predicts {model.num_classes} classes, dataset has {dataset.num_base} base classes + unknown"
        )
    if len(dataset) == 0:
        raise InvalidInputError(f"Split {dataset.meta.split} is empty")
    was_training = model.training
    model.eval()
    dtype = next(model.parameters()).dtype
    cm = ConfusionMatrix(model.num_classes)
    try:
        for start in range(0, len(dataset), batch_size):
            items = [dataset[i] for i in range(start, min(start + batch_size, len(dataset)))]
            images, labels = to_tensors(np.stack([i[0] for i in items]), np.stack([i[1] for i in items]), dtype)
            cm.add(predict(model, images).numpy(), labels.numpy())
    finally:
        model.train(was_training)
    return compute_metrics(cm, dataset.meta.class_names, step=step, config_hash=config_hash)


def evaluate_predictions(predictions: Iterable[np.ndarray], dataset: SegmentationDataset) -> MetricsReport:
    """Score precomputed label maps (one per dataset image, in order)."""
    cm = ConfusionMatrix(dataset.num_base + 1)
    count = 0
    for pred, gt in zip(predictions, dataset.labels):
        cm.add(pred, gt)
        count += 1
    if count != len(dataset):
        raise InvalidInputError(f"{count} predictions for {len(dataset)} images")
    return compute_metrics(cm, dataset.meta.class_names)


def report_rows(report: MetricsReport) -> List[List[str]]:
    rows = [["name", "iou"]]
    for name, value in report.per_class_iou.items():
        rows.append([name, "" if value is None else f"{value:.2f}"])
    for name in ("common", "private", "h_score", "miou"):
        rows.append([name, f"{getattr(report, name):.2f}"])
    return rows


def write_report(report: MetricsReport, out_dir: PathLike) -> Path:
    """Write metrics.json (full precision) and metrics.csv (2 decimals)."""
    out = ensure_directory(out_dir)
    atomic_write_text(out / "metrics.json", json.dumps(report.model_dump(mode="json"), indent=2) + "\n")
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerows(report_rows(report))
    atomic_write_text(out / "metrics.csv", buffer.getvalue())
    return out / "metrics.json"
