"""Reward state machine for the coral collection task.

A two-state deterministic machine per agent: while searching for coral,
touching a healthy coral collects it (+1) and flips the carry flag; while
carrying, touching a bucket deposits the sample (+1) and flips it back.
Touching a diseased coral costs -1 in either state; touching the wrong
target (bucket while searching, healthy coral while carrying) costs -0.1.
While carrying and not touching anything, a small distance-based shaping
term nudges the agent toward the bucket.

The carry flag and the mode encode the same bit; both are kept for
auditability and the equivalence is enforced on construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

REWARD_COLLECT = 1.0
REWARD_DEPOSIT = 1.0
PENALTY_BAD_CORAL = -1.0
PENALTY_WRONG_TARGET = -0.1

# Shaping applies per control step while carrying: shaping_coeff * ln(1 + d).
# Negative coefficient penalizes distance from the bucket.
DEFAULT_SHAPING_COEFF = -0.01


class EventKind(Enum):
    GOOD_CORAL = "good_coral"
    BAD_CORAL = "bad_coral"
    BUCKET = "bucket"


class Mode(Enum):
    CORAL_SEARCHING = "coral_searching"
    BUCKET_SEARCHING = "bucket_searching"


@dataclass(frozen=True)
class ContactEvent:
    kind: EventKind
    object_index: int
    distance: float = 0.0


@dataclass(frozen=True)
class RewardMachine:
    mode: Mode = Mode.CORAL_SEARCHING
    carrying: bool = False

    def __post_init__(self):
        if self.carrying != (self.mode is Mode.BUCKET_SEARCHING):
            raise ValueError("carry flag must match mode")


@dataclass(frozen=True)
class RewardStep:
    reward: float
    machine: RewardMachine
    collect_coral: int | None = None
    deposit: bool = False


class MisalignedTraceError(ValueError):
    """Event and distance traces have different lengths."""


def reward_step(
    machine: RewardMachine,
    events: list[ContactEvent],
    bucket_distance: float,
    shaping_coeff: float = DEFAULT_SHAPING_COEFF,
) -> RewardStep:
    """Advance the machine one step, consuming at most the nearest event.

    events must be ordered nearest-first; bucket_distance is the true
    distance to the nearest bucket and feeds the carrying-state shaping
    term shaping_coeff * ln(1 + bucket_distance).
    """
    if bucket_distance < 0:
        raise ValueError("bucket_distance must be non-negative")

    event = events[0] if events else None

    if machine.mode is Mode.CORAL_SEARCHING:
        if event is None:
            return RewardStep(0.0, machine)
        if event.kind is EventKind.GOOD_CORAL:
            new = RewardMachine(Mode.BUCKET_SEARCHING, carrying=True)
            return RewardStep(REWARD_COLLECT, new, collect_coral=event.object_index)
        if event.kind is EventKind.BAD_CORAL:
            return RewardStep(PENALTY_BAD_CORAL, machine)
        return RewardStep(PENALTY_WRONG_TARGET, machine)  # bucket, nothing to drop

    # Bucket searching (carrying a sample).
    if event is None:
        return RewardStep(shaping_coeff * float(np.log1p(bucket_distance)), machine)
    if event.kind is EventKind.BUCKET:
        new = RewardMachine(Mode.CORAL_SEARCHING, carrying=False)
        return RewardStep(REWARD_DEPOSIT, new, deposit=True)
    if event.kind is EventKind.BAD_CORAL:
        return RewardStep(PENALTY_BAD_CORAL, machine)
    return RewardStep(PENALTY_WRONG_TARGET, machine)  # good coral, hands full


def episode_return_oracle(
    event_trace: list[list[ContactEvent]],
    distance_trace: list[float],
    shaping_coeff: float = DEFAULT_SHAPING_COEFF,
    machine: RewardMachine | None = None,
) -> float:
    """Recompute an episode's cumulative reward by folding reward_step.

    Independent of the environment's own accumulation: given the per-step
    effective events and bucket distances of one agent, the result must
    equal the summed per-step rewards the environment reported, exactly.
    """
    if len(event_trace) != len(distance_trace):
        raise MisalignedTraceError(
            f"{len(event_trace)} event steps vs {len(distance_trace)} distances"
        )
    machine = machine if machine is not None else RewardMachine()
    total = 0.0
    for events, distance in zip(event_trace, distance_trace):
        step = reward_step(machine, events, distance, shaping_coeff)
        machine = step.machine
        total += step.reward
    return total
