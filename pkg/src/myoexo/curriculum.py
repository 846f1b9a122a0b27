"""Episode-level domain randomization: difficulty-weighted slope sampling
and the cyclic target-speed schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SLOPES_DEG = tuple(range(-5, 6))                       # 11 slopes, 1 degree apart
SPEED_CYCLE = (0.7, 0.9, 1.1, 1.3, 1.5, 1.3, 1.1, 0.9)  # m/s, period 8

STAGE_PRETRAIN = "1"          # exo clamped, learning to walk
STAGE_ASSISTED = "2a"         # exo under policy control
STAGE_BASELINE = "2b"         # exo clamped, matched baseline


@dataclass
class CurriculumContext:
    """Shared across environments; the trainer is the only writer."""

    stage: str = STAGE_PRETRAIN
    score_min: float = 0.5
    delta_up: float = 1.0
    delta_down: float = 0.2
    scores: np.ndarray = field(
        default_factory=lambda: np.ones(len(SLOPES_DEG)))
    speed_index: int = 0

    def __post_init__(self):
        if self.stage not in (STAGE_PRETRAIN, STAGE_ASSISTED, STAGE_BASELINE):
            raise ValueError(f"unknown stage {self.stage!r}")
        self.scores = np.asarray(self.scores, dtype=float)
        if np.any(self.scores < self.score_min):
            raise ValueError("scores must start at or above score_min")

    @property
    def exo_active(self) -> bool:
        return self.stage == STAGE_ASSISTED


def sample_slope(scores: np.ndarray, rng: np.random.Generator) -> int:
    """Categorical draw with probabilities proportional to the scores."""
    p = np.asarray(scores, dtype=float)
    return int(rng.choice(len(p), p=p / p.sum()))


def update_difficulty(ctx: CurriculumContext, slope_index: int, fell: bool) -> None:
    """A fall raises a slope's score; completion lowers it toward the floor."""
    if not 0 <= slope_index < len(ctx.scores):
        raise IndexError(f"slope index {slope_index} out of range")
    if fell:
        ctx.scores[slope_index] += ctx.delta_up
    else:
        ctx.scores[slope_index] = max(ctx.scores[slope_index] - ctx.delta_down,
                                      ctx.score_min)


def next_target_speed(ctx: CurriculumContext) -> float:
    """Current target speed; advances the cycle by one episode."""
    speed = SPEED_CYCLE[ctx.speed_index % len(SPEED_CYCLE)]
    ctx.speed_index += 1
    return speed
