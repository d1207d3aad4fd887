from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``alpha0 / sqrt(t)`` for a 1-based counter ``t``.

    With ``decay=False`` every step is ``alpha0``.
    """

    alpha0: float = 1.0
    decay: bool = True

    def __post_init__(self):
        if not self.alpha0 >= 0:
            raise ValueError(f"alpha0 must be >= 0, got {self.alpha0}")

    def __call__(self, t: int) -> float:
        return step_size(self, t)


def step_size(schedule: StepSchedule, t: int) -> float:
    if t < 1:
        raise ValueError(f"step counter is 1-based, got t={t}")
    if not schedule.decay:
        return schedule.alpha0
    return schedule.alpha0 / math.sqrt(t)
