"""Bucketed-priority experience memory.

Each stored tuple carries a priority (the absolute mean TD error over the triage
actions). The priority picks one of four buckets; sampling first draws a bucket
with its fixed probability (renormalised over the non-empty buckets), then a
tuple uniformly inside it. Every time a tuple is drawn its priority is
multiplied by ``decay`` and the tuple is re-filed. There is no importance
weighting.
"""

from __future__ import annotations

import json
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import N_TRIAGE, Action, StateVector, TriageLevel
from .errors import EmptyMemory

DEFAULT_THRESHOLDS = (0.02, 0.1, 0.3)
DEFAULT_PROBS = (0.01, 0.04, 0.15, 0.8)


@dataclass(frozen=True)
class ExperienceTuple:
    state: StateVector
    action: Action
    reward: np.ndarray
    next_state: StateVector
    terminal: bool
    appropriate_set: frozenset[TriageLevel]
    # False when s' is a forced-triage state, where asking is unavailable
    next_ask_allowed: bool = True

    def __post_init__(self):
        if self.terminal != Action(self.action).is_triage:
            raise ValueError("terminal must be true exactly for triage actions")
        if not self.appropriate_set:
            raise ValueError("appropriate_set must not be empty")

    def appropriate_mask(self) -> np.ndarray:
        mask = np.zeros(N_TRIAGE, dtype=bool)
        mask[[int(a) for a in self.appropriate_set]] = True
        return mask


@dataclass
class ExperienceBatch:
    """Column-stacked experience tuples."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminal: np.ndarray
    appropriate: np.ndarray
    next_ask_allowed: np.ndarray
    indices: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.actions)

    @classmethod
    def from_tuples(cls, tuples: Sequence[ExperienceTuple]) -> ExperienceBatch:
        return cls(
            states=np.stack([t.state for t in tuples]),
            actions=np.array([int(t.action) for t in tuples]),
            rewards=np.stack([t.reward for t in tuples]).astype(np.float64),
            next_states=np.stack([t.next_state for t in tuples]),
            terminal=np.array([t.terminal for t in tuples], dtype=bool),
            appropriate=np.stack([t.appropriate_mask() for t in tuples]),
            next_ask_allowed=np.array([t.next_ask_allowed for t in tuples], dtype=bool),
        )

    def __iter__(self) -> Iterator[ExperienceTuple]:
        for i in range(len(self)):
            yield ExperienceTuple(
                self.states[i], Action(int(self.actions[i])), self.rewards[i], self.next_states[i],
                bool(self.terminal[i]), frozenset(TriageLevel(j) for j in np.flatnonzero(self.appropriate[i])),
                bool(self.next_ask_allowed[i]),
            )


def priority(reward: np.ndarray, qvalues: np.ndarray, mode: str = "abs_mean") -> np.ndarray | float:
    """|mean_a (target_a - Q(s, a))| over the four triage actions.

    ``mode="mean_abs"`` averages absolute errors instead, so signed errors cannot cancel.
    Works on one tuple (1-d inputs) or a batch (2-d).
    """
    err = np.asarray(reward, dtype=np.float64)[..., :N_TRIAGE] - np.asarray(qvalues, dtype=np.float64)[..., :N_TRIAGE]
    if mode == "abs_mean":
        out = np.abs(err.mean(axis=-1))
    elif mode == "mean_abs":
        out = np.abs(err).mean(axis=-1)
    else:
        raise ValueError(f"unknown priority mode {mode!r}")
    return float(out) if np.ndim(out) == 0 else out


class PrioritizedMemory:
    def __init__(
        self,
        state_dim: int,
        capacity: int = 100_000,
        thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
        probs: Sequence[float] = DEFAULT_PROBS,
        decay: float = 0.999,
    ):
        thresholds = tuple(float(t) for t in thresholds)
        probs = tuple(float(p) for p in probs)
        if len(thresholds) != 3 or any(a >= b for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError(f"need 3 ascending thresholds, got {thresholds}")
        if len(probs) != 4 or min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"need 4 bucket probabilities summing to 1, got {probs}")
        if not 0.0 < decay <= 1.0:
            raise ValueError(f"decay must lie in (0, 1], got {decay}")
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.state_dim = state_dim
        self.capacity = capacity
        self.thresholds = np.array(thresholds)
        self.probs = np.array(probs)
        self.decay = decay

        self._states = np.zeros((capacity, state_dim), dtype=np.int8)
        self._next = np.zeros((capacity, state_dim), dtype=np.int8)
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros((capacity, N_TRIAGE))
        self._terminal = np.zeros(capacity, dtype=bool)
        self._appropriate = np.zeros((capacity, N_TRIAGE), dtype=bool)
        self._next_ask = np.zeros(capacity, dtype=bool)
        self._nu0 = np.zeros(capacity)
        self._times_sampled = np.zeros(capacity, dtype=np.int64)
        self._stored_at = np.zeros(capacity, dtype=np.int64)
        self._bucket = np.full(capacity, -1, dtype=np.int64)
        self._pos = np.zeros(capacity, dtype=np.int64)
        # bucket b holds slots _members[b][:_sizes[b]]
        self._members = [np.zeros(capacity, dtype=np.int64) for _ in range(4)]
        self._sizes = [0, 0, 0, 0]
        self._size = 0
        self._clock = 0
        self._powers = np.array([1.0])

    def __len__(self) -> int:
        return self._size

    @property
    def bucket_sizes(self) -> tuple[int, int, int, int]:
        return tuple(self._sizes)

    def bucket_of(self, nu) -> np.ndarray | int:
        b = np.searchsorted(self.thresholds, nu, side="right")
        return int(b) if np.ndim(b) == 0 else b

    def _decay_factors(self, times: np.ndarray) -> np.ndarray:
        # scalar pow per exponent; vectorised np.power can differ from decay ** k in the last bit
        top = int(times.max(initial=0))
        if top >= len(self._powers):
            self._powers = np.array([self.decay ** k for k in range(max(top + 1, 2 * len(self._powers)))])
        return self._powers[times]

    def priorities(self, slots=None) -> np.ndarray:
        """Current priorities, nu0 * decay ** times_sampled."""
        slots = np.arange(self._size) if slots is None else np.asarray(slots)
        return self._nu0[slots] * self._decay_factors(self._times_sampled[slots])

    def _attach(self, slot: int, bucket: int) -> None:
        self._bucket[slot] = bucket
        self._pos[slot] = self._sizes[bucket]
        self._members[bucket][self._sizes[bucket]] = slot
        self._sizes[bucket] += 1

    def _detach(self, slot: int) -> None:
        b = self._bucket[slot]
        last = self._sizes[b] - 1
        moved = self._members[b][last]
        p = self._pos[slot]
        self._members[b][p] = moved
        self._pos[moved] = p
        self._sizes[b] = last
        self._bucket[slot] = -1

    def _evict_slot(self) -> int:
        nonempty = [b for b in range(4) if self._sizes[b] > 0]
        b = min(nonempty, key=lambda k: (self.probs[k], k))
        members = self._members[b][: self._sizes[b]]
        slot = int(members[np.argmin(self._stored_at[members])])
        self._detach(slot)
        return slot

    def store(self, experience: ExperienceTuple, nu: float, step: int | None = None) -> None:
        if not nu >= 0:
            raise ValueError(f"priority must be non-negative, got {nu}")
        if self._size < self.capacity:
            slot = self._size
            self._size += 1
        else:
            slot = self._evict_slot()
        self._states[slot] = experience.state
        self._next[slot] = experience.next_state
        self._actions[slot] = int(experience.action)
        self._rewards[slot] = experience.reward
        self._terminal[slot] = experience.terminal
        self._appropriate[slot] = experience.appropriate_mask()
        self._next_ask[slot] = experience.next_ask_allowed
        self._nu0[slot] = nu
        self._times_sampled[slot] = 0
        self._stored_at[slot] = self._clock if step is None else step
        self._clock += 1
        self._attach(slot, self.bucket_of(nu))

    def sample_slots(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` slots with replacement, then decay and re-file every drawn slot."""
        if self._size == 0:
            raise EmptyMemory("cannot sample from an empty memory")
        sizes = np.array(self._sizes)
        weights = np.where(sizes > 0, self.probs, 0.0)
        if weights.sum() == 0:
            # every non-empty bucket has probability zero; fall back to size-proportional draws
            weights = sizes.astype(np.float64)
        buckets = rng.choice(4, size=n, p=weights / weights.sum())
        slots = np.empty(n, dtype=np.int64)
        for b in range(4):
            hit = buckets == b
            k = int(hit.sum())
            if k:
                slots[hit] = self._members[b][rng.integers(sizes[b], size=k)]

        uniq, times = np.unique(slots, return_counts=True)
        self._times_sampled[uniq] += times
        new_buckets = self.bucket_of(self.priorities(uniq))
        for slot, b in zip(uniq[new_buckets != self._bucket[uniq]], new_buckets[new_buckets != self._bucket[uniq]]):
            self._detach(int(slot))
            self._attach(int(slot), int(b))
        return slots

    def gather(self, slots: np.ndarray) -> ExperienceBatch:
        return ExperienceBatch(
            states=self._states[slots],
            actions=self._actions[slots],
            rewards=self._rewards[slots],
            next_states=self._next[slots],
            terminal=self._terminal[slots],
            appropriate=self._appropriate[slots],
            next_ask_allowed=self._next_ask[slots],
            indices=slots,
        )

    def sample(self, n: int, rng: np.random.Generator) -> ExperienceBatch:
        return self.gather(self.sample_slots(n, rng))

    def check_invariants(self) -> None:
        nu = self.priorities()
        assert (nu >= 0).all()
        assert sum(self._sizes) == self._size <= self.capacity
        expected = self.bucket_of(nu)
        assert (self._bucket[: self._size] == expected).all(), "bucket membership out of date"
        for b in range(4):
            members = self._members[b][: self._sizes[b]]
            assert (self._bucket[members] == b).all()
            assert (self._pos[members] == np.arange(len(members))).all()

    def dump_jsonl(self, path: str | Path) -> None:
        nu = self.priorities()
        with open(path, "w") as fh:
            for slot in range(self._size):
                fh.write(json.dumps({"nu": float(nu[slot]), "bucket": int(self._bucket[slot]),
                                     "step_stored": int(self._stored_at[slot])}) + "\n")
