"""Learning-rate schedules evaluated per optimizer step."""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Constant:
    lr: float

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class OneCycleTriangular:
    """Linear ``lo -> hi -> lo`` cycle, then a linear tail down to ``final_lr``.

    The tail takes the last ``final_fraction`` of ``total_epochs``.
    """

    lo: float
    hi: float
    total_epochs: float
    final_lr: float = 1e-4
    final_fraction: float = 0.1

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValueError("need 0 < lo < hi")
        if not 0 < self.final_fraction < 1:
            raise ValueError("final_fraction must lie in (0, 1)")
        if not self.final_lr > 0 or not self.total_epochs > 0:
            raise ValueError("final_lr and total_epochs must be positive")


@dataclass(frozen=True)
class CosineWithWarmup:
    """Linear warmup from ``base_lr`` to ``warmup_multiplier * base_lr``, then cosine decay to 0."""

    base_lr: float
    total_epochs: float
    warmup_epochs: float = 5
    warmup_multiplier: float = 4.0

    def __post_init__(self):
        if not self.base_lr > 0 or not self.warmup_multiplier > 0:
            raise ValueError("rates must be positive")
        if not 0 <= self.warmup_epochs < self.total_epochs:
            raise ValueError("warmup must end before total_epochs")


def lr_at(schedule, step, steps_per_epoch):
    """Learning rate for optimizer step ``step`` (0-based)."""
    if isinstance(schedule, Constant):
        return schedule.lr
    epoch = step / steps_per_epoch
    if isinstance(schedule, OneCycleTriangular):
        s = schedule
        cycle = s.total_epochs * (1 - s.final_fraction)
        if epoch <= cycle:
            half = cycle / 2
            frac = epoch / half if epoch <= half else (cycle - epoch) / half
            return s.lo + (s.hi - s.lo) * frac
        tail = min((epoch - cycle) / (s.total_epochs - cycle), 1.0)
        return s.lo + (s.final_lr - s.lo) * tail
    if isinstance(schedule, CosineWithWarmup):
        s = schedule
        peak = s.base_lr * s.warmup_multiplier
        if epoch < s.warmup_epochs:
            return s.base_lr + (peak - s.base_lr) * epoch / s.warmup_epochs
        progress = min((epoch - s.warmup_epochs) / (s.total_epochs - s.warmup_epochs), 1.0)
        return 0.5 * peak * (1 + math.cos(math.pi * progress))
    raise TypeError(f"unknown schedule {schedule!r}")
