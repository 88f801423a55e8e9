"""Non-learning policies: uniformly random actions and always-Green."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from ..agent import AgentConfig, TrainResult, log_row, run_episodes
from ..core import N_ACTIONS, N_TRIAGE, Action, Dataset
from ..environment import VignetteEnv
from ..metrics import EpisodeResult, SlidingWindow, aggregate

Actor = Callable[[np.ndarray, np.ndarray], np.ndarray]


def policy_random(rng: np.random.Generator, ask_allowed: bool = True) -> Action:
    """Uniform over all five actions; uniform over the triage actions when asking is blocked."""
    return Action(int(rng.integers(N_ACTIONS if ask_allowed else N_TRIAGE)))


def policy_always_green() -> Action:
    return Action.GREEN


def random_actor(rng: np.random.Generator) -> Actor:
    def act(states, ask_allowed):
        return np.array([int(policy_random(rng, bool(a))) for a in ask_allowed])
    return act


def green_actor() -> Actor:
    return lambda states, ask_allowed: np.full(len(states), int(Action.GREEN))


def expected_random_questions(dataset: Dataset, k_max: int, p_ask: float = 1.0 / N_ACTIONS) -> float:
    """Exact mean question count of the random policy over uniformly drawn vignettes.

    With h hidden items the episode asks min(G, h, k_max) questions, G geometric
    with continuation probability ``p_ask``, so the mean is sum_{j<=min(h,k_max)} p_ask^j.
    Without truncation this is p_ask / (1 - p_ask) = 0.25.
    """
    total = 0.0
    for v in dataset:
        m = min(len(v.evidence) - 1, k_max)
        total += sum(p_ask ** j for j in range(1, m + 1))
    return total / len(dataset)


def run_fixed_policy(train_set: Dataset, test_set: Dataset, make_actor: Callable[[np.random.Generator], Actor],
                     config: AgentConfig, rng: np.random.Generator) -> TrainResult:
    """Play training episodes with a fixed policy, logging like ``agent.train`` but never optimising."""
    env_rng, act_rng = rng.spawn(2)
    eval_seed = int(rng.integers(2**63))
    actor = make_actor(act_rng)
    env = VignetteEnv(train_set.evidence_space, config.k_max)
    window = SlidingWindow(train_set, config.train_window)
    result = TrainResult(net=None)
    step = n_eval = 0
    while step < config.total_steps:
        v = train_set.vignettes[int(env_rng.integers(len(train_set)))]
        s = env.reset(v, env_rng)
        result.episodes += 1
        while True:
            a = Action(int(actor(s[None, :], np.array([not env.force_triage]))[0]))
            out = env.step(a)
            step += 1
            if out.done:
                window.push(EpisodeResult(v.id, a.level, env.questions_asked))
            if step % config.eval_every == 0:
                result.log.append(log_row(step, "train", window.report(), float("nan"), 0.0))
                eval_rng = np.random.default_rng([eval_seed, n_eval])
                results = run_episodes(test_set.vignettes, make_actor(eval_rng), test_set.evidence_space,
                                       config.k_max, eval_rng)
                n_eval += 1
                result.log.append(log_row(step, "test", aggregate(results, test_set), float("nan"), 0.0))
            if out.done or step >= config.total_steps:
                break
            s = out.next_state
    result.steps = step
    return result
