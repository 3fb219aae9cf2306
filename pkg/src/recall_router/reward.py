"""Fine-grained turn reward: accuracy, focus, depth, and the terminal rule.

A turn's composite reward is a convex combination of three components:
semantic similarity of the user's response to the gold answer, topical
Jaccard overlap, and the count of distinct memory element types present.
Success fires when accuracy clears the threshold; failure when the turn cap
is reached.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from recall_router import text as textutil
from recall_router.memory_bank import ELEMENT_NAMES

_WEIGHT_TOL = 1e-9


class Terminal(str, enum.Enum):
    SUCCESS = "Success"
    FAILURE = "Failure"
    NOT_TERMINAL = "NotTerminal"


@dataclass(frozen=True)
class RewardConfig:
    w_accuracy: float = 1.0 / 3.0
    w_focus: float = 1.0 / 3.0
    w_depth: float = 1.0 / 3.0
    acc_threshold: float = 0.8
    max_turns: int = 5

    def __post_init__(self):
        total = self.w_accuracy + self.w_focus + self.w_depth
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"reward weights must sum to 1, got {total}")
        if min(self.w_accuracy, self.w_focus, self.w_depth) < 0:
            raise ValueError("reward weights must be non-negative")
        if not (0.0 <= self.acc_threshold <= 1.0):
            raise ValueError("acc_threshold must be in [0, 1]")
        if self.max_turns < 1:
            raise ValueError("max_turns must be >= 1")


@dataclass(frozen=True)
class RewardBreakdown:
    r_ra: float      # recall accuracy, [0, 1]
    r_rf: float      # recall focus, [0, 1]
    r_rd: int        # recall depth, 0..5
    composite: float
    terminal: Terminal


def recall_accuracy(r_t: str, r_ans: str, oracles) -> float:
    """Semantic similarity of the response to the gold answer."""
    if not r_ans.strip():
        raise ValueError("r_ans must be non-empty")
    return oracles.similarity(r_t, r_ans)


def recall_focus(r_t: str, r_ans: str) -> float:
    """Jaccard overlap of stop-word-filtered token sets; both-empty -> 0."""
    return textutil.jaccard(r_t, r_ans)


def recall_depth(r_t: str, oracles) -> int:
    """Number of distinct memory element types present in the response."""
    elements = oracles.detect_elements(r_t)
    return sum(1 for name in ELEMENT_NAMES if name in elements)


def composite_reward(r_ra: float, r_rf: float, r_rd: int, config: RewardConfig) -> float:
    return (
        config.w_accuracy * r_ra
        + config.w_focus * r_rf
        + config.w_depth * (r_rd / len(ELEMENT_NAMES))
    )


def evaluate_turn(r_t: str, r_ans: str, n_t: int, config: RewardConfig, oracles) -> RewardBreakdown:
    """Score one dialogue turn and decide terminality.

    Success iff accuracy clears the threshold; otherwise Failure iff the
    turn count has hit the cap; otherwise the dialogue continues. The
    composite at a terminal turn is the value that gets backpropagated.
    """
    if n_t < 1:
        raise ValueError("n_t must be >= 1")
    r_ra = recall_accuracy(r_t, r_ans, oracles)
    r_rf = recall_focus(r_t, r_ans)
    r_rd = recall_depth(r_t, oracles)
    if r_ra >= config.acc_threshold:
        terminal = Terminal.SUCCESS
    elif n_t >= config.max_turns:
        terminal = Terminal.FAILURE
    else:
        terminal = Terminal.NOT_TERMINAL
    return RewardBreakdown(
        r_ra=r_ra, r_rf=r_rf, r_rd=r_rd,
        composite=composite_reward(r_ra, r_rf, r_rd, config),
        terminal=terminal,
    )
