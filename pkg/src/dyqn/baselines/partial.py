"""Partially-observed agents: a frozen classifier supplies the triage Q-values and RL trains only ASK."""

from __future__ import annotations

import numpy as np

from ..core import Dataset, StateVector
from ..errors import NotFitted
from .ensemble import EnsembleConfig, SupervisedModel, soft_labels
from .powerset import powerset_matrix, subset_states


class CachedTriageModel:
    """Memoises class probabilities per state; the wrapped model is frozen so entries never go stale."""

    def __init__(self, model: SupervisedModel):
        if not model.fitted:
            raise NotFitted("CachedTriageModel needs a fitted model")
        self.model = model
        self._cache: dict[bytes, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._cache)

    def prewarm(self, states: np.ndarray, chunk: int = 50_000) -> None:
        states = np.asarray(states, dtype=np.int8)
        keys = [s.tobytes() for s in states]
        missing = [i for i, k in enumerate(keys) if k not in self._cache]
        for start in range(0, len(missing), chunk):
            idx = missing[start:start + chunk]
            probs = self.model.predict_proba(states[idx])
            for i, p in zip(idx, probs):
                self._cache[keys[i]] = p

    def prewarm_dataset(self, dataset: Dataset, max_items: int = 12) -> None:
        for v in dataset:
            self.prewarm(subset_states(v, dataset.evidence_space, max_items))

    def __call__(self, states) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states)).astype(np.int8)
        self.prewarm(states)
        return np.stack([self._cache[s.tobytes()] for s in states])


def partially_observed_qvalues(model, state: StateVector) -> np.ndarray:
    """Calibrated class probabilities used as the four triage Q-values."""
    if isinstance(model, SupervisedModel) and not model.fitted:
        raise NotFitted("model has not been fitted")
    return np.asarray(model(np.asarray(state)[None, :]))[0]


def train_partially_observed(train: Dataset, rng: np.random.Generator, config: EnsembleConfig | None = None,
                             seed: int = 0) -> SupervisedModel:
    """Ensemble fitted on the powerset expansion of ``train``, subsampled to ``config.max_rows`` rows."""
    config = config or EnsembleConfig()
    X, parent = powerset_matrix(train.vignettes, train.evidence_space, rng)
    targets = soft_labels(train)[parent]
    if config.max_rows is not None and len(X) > config.max_rows:
        keep = np.sort(rng.choice(len(X), size=config.max_rows, replace=False))
        X, targets = X[keep], targets[keep]
    return SupervisedModel(config, seed).fit(X, targets)
