"""
`inspect-graph`: dump the matching matrix, matching labels and edge affinities of
one batch as CSV.
"""
import csv
import io
from pathlib import Path
from typing import List, Tuple

import torch

from ..exceptions import InvalidInputError
from ..paths import atomic_write_text, ensure_directory
from ..training.checkpoint import checkpoint_config, load_checkpoint
from ..training.engine import Trainer
from .common import SOURCE_SPLIT, TARGET_SPLIT, load_split


def register(subparsers, parent) -> None:
    parser = subparsers.add_parser("inspect-graph", parents=[parent], help="Dump graph matrices for one batch")
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--data", default="data", help="Dataset root")
    parser.set_defaults(handler=run)


def matrix_csv(matrix: torch.Tensor, rows: List[Tuple[int, str, str]], cols: List[Tuple[int, str, str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["row_class", "row_domain", "row_kind"] + [f"{c}:{d}:{k}" for c, d, k in cols])
    for (c, d, k), values in zip(rows, matrix.detach().cpu().tolist()):
        writer.writerow([c, d, k] + [repr(float(v)) for v in values])
    return buffer.getvalue()


def run(args) -> int:
    state = load_checkpoint(args.checkpoint)
    config = checkpoint_config(state)
    trainer = Trainer(config, load_split(args.data, SOURCE_SPLIT, "source"), load_split(args.data, TARGET_SPLIT, "target"))
    trainer.load_state_dict(state)
    if args.seed is not None:
        trainer.data_generator.manual_seed(args.seed)
        trainer.train_generator.manual_seed(args.seed + 1)

    output = trainer.graph_snapshot(trainer.source_batches.next_batch(), trainer.target_batches.next_batch())
    if output is None:
        raise InvalidInputError("The batch produced no graph nodes")

    rows_s = output.source_nodes.descriptors()
    rows_t = output.target_nodes.descriptors()
    out = ensure_directory(args.out or "graph")
    dumps = {
        "A.csv": (output.matching.matrix, rows_s, rows_t),
        "M.csv": (output.labels, rows_s, rows_t),
        "xi_source.csv": (output.xi_source, rows_s, rows_s),
        "xi_target.csv": (output.xi_target, rows_t, rows_t),
    }
    for name, (matrix, rows, cols) in dumps.items():
        atomic_write_text(Path(out) / name, matrix_csv(matrix, rows, cols))
    print(f"{len(rows_s)} source and {len(rows_t)} target nodes; matrices written to {out}")
    return 0
