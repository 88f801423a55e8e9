from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given

from dyqn.core import DecisionBag, TriageLevel
from dyqn.errors import EmptyDecisionBag
from dyqn.rewards import counterfactual_reward, decision_probabilities, terminal_target

from conftest import bags


def test_reward_examples():
    assert counterfactual_reward(DecisionBag((0, 3, 1, 0))).tolist() == [0.0, 1.0, 1 / 3, 0.0]
    assert counterfactual_reward(DecisionBag((2, 2, 0, 1))).tolist() == [1.0, 1.0, 0.0, 0.5]
    assert counterfactual_reward(DecisionBag((0, 0, 0, 7))).tolist() == [0.0, 0.0, 0.0, 1.0]


def test_probabilities_are_exact():
    assert decision_probabilities(DecisionBag((1, 2, 0, 0))) == [Fraction(1, 3), Fraction(2, 3), 0, 0]
    with pytest.raises(EmptyDecisionBag):
        counterfactual_reward(DecisionBag())


@given(bags)
def test_reward_invariants(bag):
    r = counterfactual_reward(bag)
    assert r.max() == 1.0
    assert ((r >= 0) & (r <= 1)).all()
    assert all((r[i] == 0) == (bag[i] == 0) for i in range(4))
    # scale free: doubling every count leaves the reward unchanged
    assert np.array_equal(r, counterfactual_reward(DecisionBag(tuple(2 * c for c in bag.counts))))


@given(bags)
def test_terminal_target_reads_reward_entry(bag):
    r = counterfactual_reward(bag)
    for level in TriageLevel:
        assert terminal_target(r, level) == r[level]
