import json

import numpy as np
import pytest

from dyqn.core import Action, DecisionBag, encode_state
from dyqn.environment import VignetteEnv
from dyqn.errors import EpisodeFinished, ForcedTriageViolation

from conftest import make_vignette


def test_first_reveal_is_uniform(toy_dataset):
    v = toy_dataset["a"]
    env = VignetteEnv(6)
    rng = np.random.default_rng(0)
    counts = np.zeros(6)
    for _ in range(3000):
        counts += np.abs(env.reset(v, rng))
    freq = counts[[0, 1, 2]] / 3000
    assert np.all(np.abs(freq - 1 / 3) < 0.03)
    assert counts[3:].sum() == 0


def test_reset_reveals_exactly_one_item(toy_dataset, rng):
    env = VignetteEnv(6)
    s = env.reset(toy_dataset["c"], rng)
    assert np.count_nonzero(s) == 1
    assert not env.done and env.questions_asked == 0


def test_asking_reveals_until_exhausted(toy_dataset, rng):
    v = toy_dataset["c"]
    env = VignetteEnv(6)
    s = env.reset(v, rng)
    for k in range(3):
        assert not env.force_triage
        out = env.step(Action.ASK)
        assert np.count_nonzero(out.next_state) == k + 2
        assert np.count_nonzero(out.next_state - s) == 1
        assert not out.done
        s = out.next_state
    assert out.force_triage
    assert np.array_equal(s, encode_state(v.evidence, 6))
    with pytest.raises(ForcedTriageViolation):
        env.step(Action.ASK)
    out = env.step(Action.GREEN)
    assert out.done
    assert out.reward.tolist() == [0.0, 0.0, 1.0, 1 / 3]
    with pytest.raises(EpisodeFinished):
        env.step(Action.RED)


def test_question_cap():
    v = make_vignette("big", [(i, i % 2 == 0) for i in range(30)], (0, 1, 0, 0))
    env = VignetteEnv(30, k_max=23)
    env.reset(v, np.random.default_rng(1))
    for _ in range(23):
        out = env.step(Action.ASK)
    assert out.force_triage and env.questions_asked == 23
    assert np.count_nonzero(out.next_state) == 24
    with pytest.raises(ForcedTriageViolation):
        env.step(Action.ASK)


def test_triage_immediately_ends_episode(toy_dataset, rng):
    env = VignetteEnv(6)
    env.reset(toy_dataset["a"], rng)
    out = env.step(Action.YELLOW)
    assert out.done and env.questions_asked == 0


def test_same_seed_same_trajectory(toy_dataset):
    def play(seed):
        env = VignetteEnv(6)
        rng = np.random.default_rng(seed)
        states = [env.reset(toy_dataset["c"], rng)]
        while not env.force_triage:
            states.append(env.step(Action.ASK).next_state)
        return np.stack(states)

    assert np.array_equal(play(9), play(9))


def test_empty_vignette_rejected():
    from dyqn.core import Vignette
    env = VignetteEnv(3)
    with pytest.raises(ValueError):
        env.reset(Vignette("e", (), DecisionBag((1, 0, 0, 0))), np.random.default_rng(0))


def test_trace_dump(toy_dataset, rng, tmp_path):
    env = VignetteEnv(6, record=True)
    env.reset(toy_dataset["a"], rng)
    env.step(Action.ASK)
    env.step(Action.RED)
    path = tmp_path / "trace.jsonl"
    env.dump_trace(path)
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["action"] for r in records] == [None, "ASK", "RED"]
    assert records[-1]["done"]
