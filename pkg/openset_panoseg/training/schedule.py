"""
Learning-rate schedule: linear warmup followed by polynomial decay.
"""
from ..exceptions import InvalidInputError


def lr_schedule(step: int, warmup: int, total: int, base_lr: float, power: float = 0.9) -> float:
    """
    Learning rate at `step`.

    Ramps linearly from 0 to `base_lr` over `warmup` steps, then decays as
    base_lr * (1 - (step - warmup) / (total - warmup)) ** power. Steps past `total`
    are clamped to the final value (0).
    """
    if step < 0:
        raise InvalidInputError(f"step must be >= 0, got {step}")
    if total < warmup:
        raise InvalidInputError(f"total ({total}) must be >= warmup ({warmup})")
    step = min(step, total)
    if step < warmup:
        return base_lr * step / warmup
    if total == warmup:
        return 0.0 if step >= total else base_lr
    progress = (step - warmup) / (total - warmup)
    return base_lr * (1.0 - progress) ** power
