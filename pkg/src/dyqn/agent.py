"""Dynamic Q-learning agent.

Triage heads regress onto the counterfactual reward vector. The ``ASK`` head has
no environment reward; its target is built on the fly from the current triage
Q-values read as probabilities of an appropriate decision:

* OR query:  1 - q(s) + q(s) * q(s')
* AND query: (1 - q(s)) * (q(s') + (1 - q(s')) * Q(s', ask))

where q(.) is the best triage Q-value, restricted during training to the
triage levels that are appropriate for the vignette the tuple came from.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .core import N_TRIAGE, Action, Dataset, TriageLevel, Vignette
from .environment import DEFAULT_K_MAX, VignetteEnv
from .errors import DomainError, EmptyRestriction, ShapeError
from .memory import ExperienceBatch, ExperienceTuple, PrioritizedMemory, priority
from .metrics import EpisodeResult, MetricReport, SlidingWindow, aggregate
from .network import QNetwork, backward, forward, make_optimizer

log = logging.getLogger(__name__)

ASK = int(Action.ASK)


@dataclass
class AgentConfig:
    query_kind: str = "or"
    sigma_start: float = 0.05
    sigma_end: float = 0.001
    sigma_decay_steps: int = 3000
    burn_in: int = 1000
    batch_size: int = 200
    lr: float = 1e-3
    optimizer: str = "sgd"
    hidden: int = 1024
    k_max: int = DEFAULT_K_MAX
    use_appropriate_qm: bool = True
    # False for the partially-observed agents, whose triage heads come from a frozen classifier
    train_triage_heads: bool = True
    priority_mode: str = "abs_mean"
    total_steps: int = 30_000
    eval_every: int = 250
    train_window: int = 20

    def __post_init__(self):
        if self.query_kind not in ("or", "and"):
            raise ValueError(f"query_kind must be 'or' or 'and', got {self.query_kind!r}")
        if not self.sigma_start >= self.sigma_end >= 0:
            raise ValueError("need sigma_start >= sigma_end >= 0")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")


def q_m(qvalues, restrict_to: Iterable[TriageLevel] | None = None) -> float:
    """Best triage Q-value; ``ASK`` is never included."""
    q = np.asarray(qvalues, dtype=np.float64)
    if q.shape[-1] < N_TRIAGE:
        raise ShapeError(f"need at least {N_TRIAGE} Q-values, got {q.shape}")
    if restrict_to is None:
        return float(q[:N_TRIAGE].max())
    levels = [int(TriageLevel(a)) for a in restrict_to]
    if not levels:
        raise EmptyRestriction("restriction set is empty")
    return float(q[levels].max())


def q_m_batch(qvalues: np.ndarray, allowed: np.ndarray | None = None) -> np.ndarray:
    q = qvalues[:, :N_TRIAGE]
    if allowed is None:
        return q.max(axis=1)
    if not allowed.any(axis=1).all():
        raise EmptyRestriction("a row has no allowed triage level")
    return np.where(allowed, q, -np.inf).max(axis=1)


def _check_unit(*values) -> None:
    for v in values:
        a = np.asarray(v, dtype=np.float64)
        if not ((a >= 0.0) & (a <= 1.0)).all():
            raise DomainError(f"probability outside [0, 1]: {v}")


def target_or(qm_s, qm_next):
    """P(wrong now or right next) = (1 - q) + q * q'. Clamped to [0, 1] against rounding."""
    _check_unit(qm_s, qm_next)
    qm_s = np.asarray(qm_s, dtype=np.float64)
    out = np.clip((1.0 - qm_s) + qm_s * qm_next, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def target_and(qm_s, qm_next, q_ask_next):
    """P(first right decision comes later) = (1 - q)(q' + (1 - q') Q(s', ask))."""
    _check_unit(qm_s, qm_next, q_ask_next)
    qm_s = np.asarray(qm_s, dtype=np.float64)
    qm_next = np.asarray(qm_next, dtype=np.float64)
    out = np.clip((1.0 - qm_s) * (qm_next + (1.0 - qm_next) * q_ask_next), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


class DyQNAgent:
    """Q-function wrapper.

    With ``triage_model`` set, the four triage Q-values are that model's class
    probabilities and only the network's ``ASK`` output is used.
    """

    def __init__(self, net: QNetwork, config: AgentConfig,
                 triage_model: Callable[[np.ndarray], np.ndarray] | None = None):
        self.net = net
        self.config = config
        self.triage_model = triage_model

    def qvalues(self, states) -> np.ndarray:
        q = forward(self.net, states)
        if self.triage_model is None:
            return q
        single = q.ndim == 1
        q = np.atleast_2d(q).copy()
        q[:, :N_TRIAGE] = self.triage_model(np.atleast_2d(states))
        return q[0] if single else q

    def act(self, states: np.ndarray, ask_allowed: np.ndarray) -> np.ndarray:
        """Greedy actions for a batch of states (no exploration noise)."""
        q = self.qvalues(states)
        return select_actions(q, 0.0, ask_allowed, None)


def _qfunc(source) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(source, QNetwork):
        return lambda s: forward(source, s)
    if hasattr(source, "qvalues"):
        return source.qvalues
    return source


def build_targets(batch: ExperienceBatch | Sequence[ExperienceTuple], source, config: AgentConfig
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Per-action targets and loss mask, both shaped (n, 5).

    ``source`` is a QNetwork, a DyQNAgent, or any callable mapping states to (n, 5) Q-values.
    """
    if not isinstance(batch, ExperienceBatch):
        batch = ExperienceBatch.from_tuples(list(batch))
    n = len(batch)
    if n == 0:
        raise ValueError("empty batch")
    qfn = _qfunc(source)
    q_both = qfn(np.concatenate([batch.states, batch.next_states]))
    if q_both.shape != (2 * n, 5):
        raise ShapeError(f"Q-function returned {q_both.shape}, expected {(2 * n, 5)}")
    q_s, q_next = q_both[:n], q_both[n:]

    targets = np.zeros((n, 5))
    mask = np.zeros((n, 5), dtype=bool)
    targets[:, :N_TRIAGE] = batch.rewards
    mask[:, :N_TRIAGE] = config.train_triage_heads

    allowed = batch.appropriate if config.use_appropriate_qm else None
    qm_s = q_m_batch(q_s, allowed)
    qm_next = q_m_batch(q_next, allowed)
    if config.query_kind == "or":
        ask = target_or(qm_s, qm_next)
    else:
        # past the last available question the chain of future chances is empty
        q_ask_next = np.where(batch.next_ask_allowed, q_next[:, ASK], 0.0)
        ask = target_and(qm_s, qm_next, q_ask_next)
    live = ~batch.terminal
    targets[:, ASK] = np.where(live, ask, 0.0)
    mask[:, ASK] = live
    return targets, mask


def select_actions(qvalues: np.ndarray, sigma: float, ask_allowed, rng: np.random.Generator | None) -> np.ndarray:
    """Greedy choice after adding N(0, sigma) to the ``ASK`` value only.

    Ties go to the lowest index: the more urgent triage wins, and any triage beats ``ASK``.
    """
    q = np.array(qvalues, dtype=np.float64, ndmin=2)
    allowed = np.broadcast_to(np.asarray(ask_allowed, dtype=bool), (q.shape[0],))
    if sigma > 0:
        q[:, ASK] += rng.normal(0.0, sigma, size=q.shape[0])
    q[~allowed, ASK] = -np.inf
    return np.argmax(q, axis=1)


def select_action(qvalues, sigma: float, ask_allowed: bool, rng: np.random.Generator | None) -> Action:
    return Action(int(select_actions(np.asarray(qvalues)[None, :], sigma, ask_allowed, rng)[0]))


def sigma_schedule(step: int, config: AgentConfig) -> float:
    """Linear decay from sigma_start to sigma_end over sigma_decay_steps, then flat."""
    if step >= config.sigma_decay_steps:
        return config.sigma_end
    frac = step / config.sigma_decay_steps
    return config.sigma_start + (config.sigma_end - config.sigma_start) * frac


def run_episodes(vignettes: Sequence[Vignette], act: Callable[[np.ndarray, np.ndarray], np.ndarray],
                 evidence_space: int, k_max: int, rng: np.random.Generator) -> list[EpisodeResult]:
    """Play one episode per vignette in lockstep, batching the policy calls.

    ``act(states, ask_allowed)`` returns one action index per row.
    """
    envs = [VignetteEnv(evidence_space, k_max) for _ in vignettes]
    states = [env.reset(v, rng) for env, v in zip(envs, vignettes)]
    results: list[EpisodeResult | None] = [None] * len(vignettes)
    active = list(range(len(vignettes)))
    while active:
        s = np.stack([states[i] for i in active])
        allowed = np.array([not envs[i].force_triage for i in active])
        actions = act(s, allowed)
        still = []
        for i, a in zip(active, actions):
            out = envs[i].step(Action(int(a)), rng)
            if out.done:
                results[i] = EpisodeResult(vignettes[i].id, TriageLevel(int(a)), envs[i].questions_asked)
            else:
                states[i] = out.next_state
                still.append(i)
        active = still
    return results


def evaluate(agent: DyQNAgent, dataset: Dataset, k_max: int, rng: np.random.Generator) -> MetricReport:
    results = run_episodes(dataset.vignettes, agent.act, dataset.evidence_space, k_max, rng)
    return aggregate(results, dataset)


@dataclass
class TrainResult:
    net: QNetwork
    log: list[dict] = field(default_factory=list)
    steps: int = 0
    episodes: int = 0


def log_row(step: int, split: str, report: MetricReport, loss: float, sigma: float) -> dict:
    return {"step": step, "split": split, "appropriateness": report.appropriateness, "safety": report.safety,
            "avg_questions": report.avg_questions, "loss": loss, "sigma": sigma}


def train(train_set: Dataset, test_set: Dataset, config: AgentConfig, memory: PrioritizedMemory,
          net: QNetwork, rng: np.random.Generator,
          triage_model: Callable[[np.ndarray], np.ndarray] | None = None) -> TrainResult:
    """Interleave environment steps and optimisation cycles.

    Every environment step stores one experience tuple; once more than
    ``burn_in`` steps have been taken, each step is followed by one
    optimisation cycle on a sampled batch. Every ``eval_every`` steps one
    training row (sliding window of recent episodes) and one test row (greedy
    play over the whole test set) are appended to the log.
    """
    agent = DyQNAgent(net, config, triage_model)
    optimizer = make_optimizer(config.optimizer, config.lr)
    env_rng, noise_rng, mem_rng = rng.spawn(3)
    eval_seed = int(rng.integers(2**63))
    E = train_set.evidence_space
    env = VignetteEnv(E, config.k_max)
    window = SlidingWindow(train_set, config.train_window)
    masks = {v.id: frozenset(TriageLevel(i) for i in np.flatnonzero(v.appropriate_mask()))
             for v in train_set}
    result = TrainResult(net)
    losses: list[float] = []
    n_eval = 0
    step = 0
    vignettes = train_set.vignettes

    while step < config.total_steps:
        v = vignettes[int(env_rng.integers(len(vignettes)))]
        s = env.reset(v, env_rng)
        result.episodes += 1
        while True:
            q = agent.qvalues(s)
            sigma = sigma_schedule(step, config)
            a = select_action(q, sigma, not env.force_triage, noise_rng)
            out = env.step(a)
            exp = ExperienceTuple(s, a, out.reward, out.next_state, out.done, masks[v.id],
                                  next_ask_allowed=not out.force_triage)
            memory.store(exp, priority(out.reward, q, config.priority_mode), step)
            step += 1
            if step > config.burn_in:
                batch = memory.sample(config.batch_size, mem_rng)
                targets, mask = build_targets(batch, agent, config)
                loss, grads = backward(net, batch.states, targets, mask)
                optimizer.step(net, grads)
                losses.append(loss)
            if out.done:
                window.push(EpisodeResult(v.id, a.level, env.questions_asked))
            if step % config.eval_every == 0:
                loss_mean = float(np.mean(losses)) if losses else float("nan")
                losses.clear()
                result.log.append(log_row(step, "train", window.report(), loss_mean, sigma))
                report = evaluate(agent, test_set, config.k_max, np.random.default_rng([eval_seed, n_eval]))
                n_eval += 1
                result.log.append(log_row(step, "test", report, loss_mean, sigma))
                log.debug("step %d test %s", step, report)
            if out.done or step >= config.total_steps:
                break
            s = out.next_state
    result.steps = step
    return result
