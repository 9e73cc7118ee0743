"""
`gen-data`: render the synthetic source/target benchmark to disk.
"""
from pydantic import ValidationError

from ..data.dataset import write_dataset
from ..exceptions import InvalidInputError
from ..models import WEATHER_PRESETS, source_spec, target_spec
from .common import SOURCE_SPLIT, TARGET_SPLIT, VALIDATION_SPLIT, parse_size


def register(subparsers, parent) -> None:
    parser = subparsers.add_parser("gen-data", parents=[parent], help="Generate the synthetic benchmark")
    parser.add_argument("--size", default="64x128", help="Image size HxW (default: 64x128)")
    parser.add_argument("--source-count", type=int, default=400)
    parser.add_argument("--target-count", type=int, default=400)
    parser.add_argument("--val-count", type=int, default=50)
    parser.add_argument("--weather", choices=sorted(WEATHER_PRESETS), default="fog")
    parser.add_argument("--warp", type=float, default=0.1, help="Target warp amplitude in [0, 0.25]")
    parser.add_argument("--no-private", action="store_true", help="Disable the target-private class")
    parser.add_argument("--workers", type=int, default=1)
    parser.set_defaults(handler=run)


def run(args) -> int:
    root = args.out or "data"
    seed = args.seed if args.seed is not None else 0
    size = parse_size(args.size)
    try:
        target = target_spec(weather=args.weather, warp_amplitude=args.warp, private=not args.no_private)
    except ValidationError as e:
        raise InvalidInputError(f"Invalid target domain: {e}")

    splits = (
        (SOURCE_SPLIT, source_spec(), args.source_count, seed),
        (TARGET_SPLIT, target, args.target_count, seed + 1),
        (VALIDATION_SPLIT, target, args.val_count, seed + 2),
    )
    for split, spec, count, split_seed in splits:
        write_dataset(root, split, spec, count, size=size, seed=split_seed, workers=args.workers)
    print(f"Wrote {', '.join(s[0] for s in splits)} to {root}")
    return 0
