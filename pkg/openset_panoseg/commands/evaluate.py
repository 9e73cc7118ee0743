"""
`eval`: score a checkpoint, or a directory of predicted label maps, on a split.
"""
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from ..evaluation import evaluate, evaluate_predictions, write_report
from ..exceptions import DatasetError
from ..models import MetricsReport
from ..training.checkpoint import checkpoint_config, load_checkpoint
from ..training.engine import restore_model
from .common import VALIDATION_SPLIT, load_split

logger = logging.getLogger(__name__)


def register(subparsers, parent) -> None:
    parser = subparsers.add_parser("eval", parents=[parent], help="Evaluate on a dataset split")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint", help="Checkpoint to evaluate")
    source.add_argument("--predictions", help="Directory of NNNNN.png predicted label maps")
    parser.add_argument("--data", default="data", help="Dataset root")
    parser.add_argument("--split", default=VALIDATION_SPLIT)
    parser.set_defaults(handler=run)


def read_predictions(directory: str, count: int):
    root = Path(directory)
    for index in range(count):
        path = root / f"{index:05d}.png"
        if not path.is_file():
            raise DatasetError(f"Missing prediction: {path}")
        with Image.open(path) as img:
            yield np.array(img.convert("L"), dtype=np.uint8)


def run(args) -> int:
    dataset = load_split(args.data, args.split, "target")
    if args.checkpoint:
        state = load_checkpoint(args.checkpoint)
        model = restore_model(state, checkpoint_config(state))
        report = evaluate(model, dataset, step=int(state["step"]), config_hash=state["config_hash"])
    else:
        report = evaluate_predictions(read_predictions(args.predictions, len(dataset)), dataset)

    out = write_report(report, args.out or "eval")
    print_report(report)
    print(f"Report written to {out}")
    return 0


def print_report(report: MetricsReport) -> None:
    for name, value in report.per_class_iou.items():
        print(f"  {name:<12} {'n/a' if value is None else f'{value:6.2f}'}")
    print(f"common {report.common:.2f} private {report.private:.2f} H {report.h_score:.2f} "
          f"mIoU {report.miou:.2f} ({report.pixels} pixels)")
