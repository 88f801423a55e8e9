"""Calibrated soft-voting ensemble over the four triage classes.

Members are scikit-learn estimators. Each member is cross-fitted: for every
fold a copy is trained on the other folds and one isotonic map per class is
fitted on the held-out scores. A member's prediction is the fold average of
its calibrated, renormalised probabilities; the ensemble averages members.

Training targets are soft: each vignette contributes one weighted row per
triage level that experts chose, with weight equal to that level's share of
the expert decisions.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import clone
from sklearn.ensemble import RandomForestClassifier
from sklearn.linear_model import LogisticRegression, SGDClassifier
from sklearn.model_selection import KFold
from sklearn.neural_network import MLPClassifier
from sklearn.tree import DecisionTreeClassifier

from ..core import N_TRIAGE, Dataset
from ..errors import ConfigError, NotFitted, SingleClassError
from .isotonic import IsotonicMap, isotonic_fit

MEMBER_NAMES = ("sgd", "logistic", "mlp", "tree", "forest")

MODEL_FORMAT = "dyqn-supervised"
MODEL_VERSION = 1


@dataclass
class EnsembleConfig:
    members: tuple[str, ...] = MEMBER_NAMES
    mlp_hidden: tuple[int, ...] = (512, 512)
    calibration_folds: int = 5
    soft_targets: bool = True
    # cap on expanded (powerset) rows used to fit the partially-observed model
    max_rows: int | None = 20_000

    def __post_init__(self):
        self.members = tuple(self.members)
        self.mlp_hidden = tuple(int(h) for h in self.mlp_hidden)
        unknown = set(self.members) - set(MEMBER_NAMES)
        if unknown or not self.members:
            raise ConfigError(f"unknown or empty ensemble members: {sorted(unknown)}")
        if self.calibration_folds < 2:
            raise ConfigError("calibration_folds must be >= 2")


def make_member(name: str, config: EnsembleConfig, seed: int):
    if name == "sgd":
        return SGDClassifier(max_iter=1000, random_state=seed)
    if name == "logistic":
        return LogisticRegression(max_iter=1000)
    if name == "mlp":
        return MLPClassifier(hidden_layer_sizes=config.mlp_hidden, alpha=1.0, max_iter=1000,
                             n_iter_no_change=5, tol=1e-3, random_state=seed)
    if name == "tree":
        return DecisionTreeClassifier(max_depth=5, random_state=seed)
    if name == "forest":
        return RandomForestClassifier(max_depth=5, n_estimators=10, max_features=1, random_state=seed)
    raise ConfigError(f"unknown member {name!r}")


def soft_labels(dataset: Dataset) -> np.ndarray:
    """Row-normalised expert decision shares, shape (n, 4)."""
    counts = np.array([v.decisions.counts for v in dataset], dtype=np.float64)
    return counts / counts.sum(axis=1, keepdims=True)


def modal_labels(targets: np.ndarray) -> np.ndarray:
    """Most frequent level per row; ties go to the more urgent level."""
    return np.argmax(targets, axis=1)


def _replicate(X: np.ndarray, targets: np.ndarray, soft: bool):
    if not soft:
        return X, modal_labels(targets), np.ones(len(X))
    rows, cls = np.nonzero(targets > 0)
    return X[rows], cls, targets[rows, cls]


def _scores(model, X: np.ndarray) -> np.ndarray:
    """Per-class scores in the fixed 4-column layout; absent classes score 0."""
    out = np.zeros((len(X), N_TRIAGE))
    classes = model.classes_.astype(int)
    if hasattr(model, "predict_proba"):
        out[:, classes] = model.predict_proba(X)
        return out
    d = model.decision_function(X)
    if d.ndim == 1:
        out[:, classes[1]] = d
        out[:, classes[0]] = -d
    else:
        out[:, classes] = d
    return out


def _calibrated(maps: list[IsotonicMap], scores: np.ndarray) -> np.ndarray:
    p = np.column_stack([maps[c](scores[:, c]) for c in range(N_TRIAGE)])
    total = p.sum(axis=1, keepdims=True)
    return np.where(total > 0, p / np.where(total > 0, total, 1.0), 1.0 / N_TRIAGE)


@dataclass
class CalibratedMember:
    name: str
    folds: list[tuple[object, list[IsotonicMap]]] = field(default_factory=list)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.mean([_calibrated(maps, _scores(model, X)) for model, maps in self.folds], axis=0)


class SupervisedModel:
    def __init__(self, config: EnsembleConfig | None = None, seed: int = 0):
        self.config = config or EnsembleConfig()
        self.seed = seed
        self.members: list[CalibratedMember] = []

    @property
    def fitted(self) -> bool:
        return bool(self.members)

    def fit(self, X: np.ndarray, targets: np.ndarray) -> SupervisedModel:
        """Fit on states ``X`` (n, E) and per-class targets (n, 4) whose rows sum to 1."""
        X = np.asarray(X, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        if len(X) == 0:
            raise ValueError("empty training set")
        if np.count_nonzero(targets.sum(axis=0) > 0) < 2:
            raise SingleClassError("training targets cover a single triage class")
        cfg = self.config
        kfold = KFold(n_splits=min(cfg.calibration_folds, len(X)), shuffle=True, random_state=self.seed)
        splits = list(kfold.split(X))
        members = []
        # canonical order keeps the result independent of how members were listed
        for name in sorted(set(cfg.members), key=MEMBER_NAMES.index):
            base = make_member(name, cfg, self.seed + MEMBER_NAMES.index(name))
            member = CalibratedMember(name)
            for train_idx, cal_idx in splits:
                Xt, yt, wt = _replicate(X[train_idx], targets[train_idx], cfg.soft_targets)
                if len(np.unique(yt)) < 2:
                    continue
                model = clone(base).fit(Xt, yt, sample_weight=wt)
                Xc, yc, wc = _replicate(X[cal_idx], targets[cal_idx], True)
                s = _scores(model, Xc)
                maps = [isotonic_fit(s[:, c], (yc == c).astype(float), wc) for c in range(N_TRIAGE)]
                member.folds.append((model, maps))
            if not member.folds:
                raise SingleClassError(f"every calibration fold of {name} saw a single class")
            members.append(member)
        self.members = members
        return self

    def fit_dataset(self, dataset: Dataset) -> SupervisedModel:
        return self.fit(dataset.states(), soft_labels(dataset))

    def predict_proba(self, states) -> np.ndarray:
        if not self.fitted:
            raise NotFitted("SupervisedModel used before fit()")
        X = np.atleast_2d(np.asarray(states, dtype=np.float64))
        p = np.mean([m.predict_proba(X) for m in self.members], axis=0)
        return p / p.sum(axis=1, keepdims=True)

    def __call__(self, states) -> np.ndarray:
        return self.predict_proba(states)

    def predict(self, states) -> np.ndarray:
        return np.argmax(self.predict_proba(states), axis=1)

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            pickle.dump({"format": MODEL_FORMAT, "version": MODEL_VERSION, "model": self}, fh)

    @staticmethod
    def load(path: str | Path) -> SupervisedModel:
        with open(path, "rb") as fh:
            doc = pickle.load(fh)
        if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise ValueError(f"{path}: not a {MODEL_FORMAT} v{MODEL_VERSION} file")
        return doc["model"]


def train_fully_observed(train: Dataset, config: EnsembleConfig | None = None, seed: int = 0) -> SupervisedModel:
    """Ensemble fitted on the complete evidence of every training vignette."""
    if len(train) == 0:
        raise ValueError("empty training set")
    return SupervisedModel(config, seed).fit_dataset(train)
