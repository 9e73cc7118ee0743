"""
`train`: run self-training with the graph matching adapter.
"""
import logging
from pathlib import Path

from ..config import load_config
from ..training.engine import Trainer
from ..training.metric_log import create_metric_log
from .common import SOURCE_SPLIT, TARGET_SPLIT, VALIDATION_SPLIT, load_split, parse_overrides

logger = logging.getLogger(__name__)


def register(subparsers, parent) -> None:
    parser = subparsers.add_parser("train", parents=[parent], help="Train a model")
    parser.add_argument("--config", default=None, help="Configuration file (key = value or YAML)")
    parser.add_argument("--data", default="data", help="Dataset root written by gen-data")
    parser.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE",
                        help="Override a configuration key (repeatable)")
    parser.add_argument("--resume", default=None, help="Checkpoint to continue from")
    parser.add_argument("--no-validation", action="store_true", help="Skip periodic validation")
    parser.set_defaults(handler=run)


def run(args) -> int:
    overrides = parse_overrides(args.overrides)
    if args.seed is not None:
        overrides["seed"] = args.seed
    config = load_config(args.config, overrides)

    out = Path(args.out or "runs/default")
    source = load_split(args.data, SOURCE_SPLIT, "source")
    target = load_split(args.data, TARGET_SPLIT, "target")
    validation = None if args.no_validation else load_split(args.data, VALIDATION_SPLIT, "target")

    metric_log = create_metric_log("csv", str(out / "metrics.csv"))
    try:
        trainer = Trainer(config, source, target, validation, out_dir=out, metric_log=metric_log)
        if args.resume:
            trainer.resume(args.resume)
        logger.info("Training %s for %d steps into %s", trainer.config_hash[:12], config.total_steps, out)
        trainer.fit()
    finally:
        metric_log.close()

    report = trainer.validate()
    if report is not None:
        print(f"step {trainer.step}: common {report.common:.2f} private {report.private:.2f} "
              f"H {report.h_score:.2f} mIoU {report.miou:.2f}")
    print(f"Checkpoints in {out}")
    return 0
