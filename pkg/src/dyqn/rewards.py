"""Counterfactual vector reward derived from the bag of expert decisions."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .core import DecisionBag, TriageLevel
from .errors import EmptyDecisionBag


def decision_probabilities(bag: DecisionBag) -> list[Fraction]:
    """Exact P(a | bag) = m(a) / |bag|."""
    total = bag.total
    if total == 0:
        raise EmptyDecisionBag("reward of an empty bag")
    return [Fraction(c, total) for c in bag.counts]


def counterfactual_reward(bag: DecisionBag) -> np.ndarray:
    """Per-level reward P(a|bag) / max P(a'|bag), the same for every state.

    Computed in rationals and divided once, so the winning levels get exactly 1.0.
    """
    probs = decision_probabilities(bag)
    top = max(probs)
    return np.array([float(p / top) for p in probs], dtype=np.float64)


def terminal_target(reward: np.ndarray, level: TriageLevel | int) -> float:
    """Target for a terminal triage action: the reward entry alone, no bootstrap."""
    return float(reward[int(level)])
