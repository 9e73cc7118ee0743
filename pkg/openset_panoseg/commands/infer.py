"""
`infer`: predict a label map for one image.
"""
import numpy as np
import torch
from PIL import Image

from ..data.arrays import dequantize_image
from ..exceptions import DatasetError
from ..paths import atomic_write
from ..training.checkpoint import checkpoint_config, load_checkpoint
from ..training.engine import DTYPES, restore_model


def register(subparsers, parent) -> None:
    parser = subparsers.add_parser("infer", parents=[parent], help="Predict a label map for an image")
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--image", required=True, help="RGB PNG, height and width divisible by 16")
    parser.set_defaults(handler=run)


def run(args) -> int:
    state = load_checkpoint(args.checkpoint)
    config = checkpoint_config(state)
    model = restore_model(state, config)
    try:
        with Image.open(args.image) as img:
            image = np.array(img.convert("RGB"), dtype=np.uint8)
    except OSError as e:
        raise DatasetError(f"Cannot read image {args.image}: {e}")

    batch = torch.from_numpy(dequantize_image(image)).permute(2, 0, 1).unsqueeze(0).to(DTYPES[config.dtype])
    with torch.no_grad():
        pred = model(batch).logits.argmax(dim=1)[0].numpy().astype(np.uint8)

    out = args.out or "prediction.png"
    label = Image.fromarray(pred)
    atomic_write(out, lambda tmp: label.save(tmp, format="PNG"))
    print(f"Wrote {out} ({pred.shape[0]}x{pred.shape[1]}, classes {sorted(np.unique(pred).tolist())})")
    return 0
