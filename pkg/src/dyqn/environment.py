"""Episodic vignette simulator.

An episode starts with one uniformly chosen piece of evidence revealed. ``ASK``
reveals another hidden piece uniformly at random; any triage action ends the
episode. Once the vignette is exhausted or ``k_max`` questions were asked the
environment signals ``force_triage`` and refuses further questions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Action, EvidenceAssignment, StateVector, Vignette
from .errors import EpisodeFinished, ForcedTriageViolation
from .rewards import counterfactual_reward

DEFAULT_K_MAX = 23


@dataclass(frozen=True)
class StepOutcome:
    next_state: StateVector
    reward: np.ndarray
    done: bool
    force_triage: bool


class VignetteEnv:
    def __init__(self, evidence_space: int, k_max: int = DEFAULT_K_MAX, record: bool = False):
        self.evidence_space = evidence_space
        self.k_max = k_max
        self.record = record
        self.trace: list[dict] = []
        self.vignette: Vignette | None = None
        self.done = True

    def reset(self, vignette: Vignette, rng: np.random.Generator) -> StateVector:
        if not vignette.evidence:
            raise ValueError(f"vignette {vignette.id!r} has no evidence to reveal")
        self.vignette = vignette
        self.reward = counterfactual_reward(vignette.decisions)
        self._rng = rng
        first_idx = int(rng.integers(len(vignette.evidence)))
        first = vignette.evidence[first_idx]
        self._hidden = [e for i, e in enumerate(vignette.evidence) if i != first_idx]
        self.revealed: list[EvidenceAssignment] = [first]
        self.state = np.zeros(self.evidence_space, dtype=np.int8)
        self.state[first.index] = first.value
        self.step_count = 0
        self.done = False
        if self.record:
            self.trace = [{"vignette": vignette.id, "step": 0, "action": None,
                           "revealed": [first.index, first.present]}]
        return self.state.copy()

    @property
    def force_triage(self) -> bool:
        return not self._hidden or self.step_count >= self.k_max

    @property
    def questions_asked(self) -> int:
        return self.step_count

    def step(self, action: Action, rng: np.random.Generator | None = None) -> StepOutcome:
        """Apply ``action``; ``rng`` defaults to the generator passed to ``reset``."""
        if self.done:
            raise EpisodeFinished("step() called on a finished episode")
        action = Action(action)
        revealed = None
        if action is Action.ASK:
            if self.force_triage:
                raise ForcedTriageViolation("ASK after the environment forced a triage decision")
            rng = self._rng if rng is None else rng
            j = int(rng.integers(len(self._hidden)))
            self._hidden[j], self._hidden[-1] = self._hidden[-1], self._hidden[j]
            item = self._hidden.pop()
            self.revealed.append(item)
            self.state[item.index] = item.value
            self.step_count += 1
            revealed = [item.index, item.present]
        else:
            self.done = True
        if self.record:
            self.trace.append({"vignette": self.vignette.id, "step": len(self.trace),
                               "action": action.name, "revealed": revealed,
                               "done": self.done, "force_triage": self.force_triage})
        return StepOutcome(self.state.copy(), self.reward, self.done, self.force_triage)

    def dump_trace(self, path: str | Path) -> None:
        with open(path, "a") as fh:
            for record in self.trace:
                fh.write(json.dumps(record) + "\n")
