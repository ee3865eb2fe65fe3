"""Linear warmup / linear decay learning-rate multiplier."""

from __future__ import annotations

import math

__all__ = ["warmup_steps", "lr_multiplier"]


def warmup_steps(total_steps: int, warmup_ratio: float) -> int:
    if not 0.0 <= warmup_ratio < 1.0:
        raise ValueError("warmup_ratio must be in [0, 1)")
    # guard against 0.1 * 30 == 3.0000000000000004
    return math.ceil(warmup_ratio * total_steps - 1e-9)


def lr_multiplier(step: int, total_steps: int, warmup_ratio: float = 0.1) -> float:
    """Multiplier in [0, 1]: ramps 0 -> 1 over ``ceil(warmup_ratio * total)`` steps,
    then decays linearly to 0 at ``total_steps``."""
    if total_steps < 0 or not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warm = warmup_steps(total_steps, warmup_ratio)
    if step < warm:
        return step / warm
    if total_steps == warm:
        return 1.0
    return max(0.0, (total_steps - step) / (total_steps - warm))
