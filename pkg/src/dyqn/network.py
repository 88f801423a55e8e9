"""Fixed-topology Q-network: E -> H -> H -> H -> 5, SELU hidden units, sigmoid outputs.

Forward and backward passes are written out by hand in float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import N_ACTIONS
from .errors import NumericalError, ShapeError

SELU_LAMBDA = 1.0507009873554804934193349852946
SELU_ALPHA = 1.6732632423543772848170429916717

CHECKPOINT_FORMAT = "dyqn-qnetwork"
CHECKPOINT_VERSION = 1


def selu(x: np.ndarray) -> np.ndarray:
    return SELU_LAMBDA * np.where(x > 0, x, SELU_ALPHA * np.expm1(np.minimum(x, 0.0)))


def selu_grad(x: np.ndarray) -> np.ndarray:
    return SELU_LAMBDA * np.where(x > 0, 1.0, SELU_ALPHA * np.exp(np.minimum(x, 0.0)))


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class QNetwork:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != 4 or len(self.biases) != 4:
            raise ShapeError("a QNetwork has exactly four layers")
        dims = [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise ShapeError(f"layer {i}: weight {w.shape} / bias {b.shape} break the chain {dims}")
        if dims[1] != dims[2] or dims[2] != dims[3] or dims[4] != N_ACTIONS:
            raise ShapeError(f"expected E->H->H->H->{N_ACTIONS}, got {dims}")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def hidden(self) -> int:
        return self.weights[0].shape[1]

    @classmethod
    def init(cls, input_dim: int, hidden: int, rng: np.random.Generator) -> QNetwork:
        """Normal weights with variance 1/fan_in (the usual SELU pairing), zero biases."""
        dims = [input_dim, hidden, hidden, hidden, N_ACTIONS]
        weights = [rng.normal(0.0, 1.0 / np.sqrt(dims[i]), size=(dims[i], dims[i + 1])) for i in range(4)]
        biases = [np.zeros(dims[i + 1]) for i in range(4)]
        return cls(weights, biases)

    @classmethod
    def zeros(cls, input_dim: int, hidden: int) -> QNetwork:
        dims = [input_dim, hidden, hidden, hidden, N_ACTIONS]
        return cls([np.zeros((dims[i], dims[i + 1])) for i in range(4)],
                   [np.zeros(dims[i + 1]) for i in range(4)])

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> QNetwork:
        return QNetwork([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def is_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params())


@dataclass
class GradientSet:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]


def _as_batch(net: QNetwork, states) -> tuple[np.ndarray, bool]:
    x = np.asarray(states, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ShapeError(f"state shape {np.shape(states)} does not match input dim {net.input_dim}")
    return x, single


def _forward_cache(net: QNetwork, x: np.ndarray):
    pre, acts = [], [x]
    h = x
    for i in range(3):
        z = h @ net.weights[i] + net.biases[i]
        pre.append(z)
        h = selu(z)
        acts.append(h)
    z = h @ net.weights[3] + net.biases[3]
    return pre, acts, sigmoid(z)


def forward(net: QNetwork, states) -> np.ndarray:
    """Q-values in (0, 1) for one state (shape (5,)) or a batch (shape (n, 5))."""
    x, single = _as_batch(net, states)
    out = _forward_cache(net, x)[2]
    return out[0] if single else out


def backward(net: QNetwork, states, targets, mask) -> tuple[float, GradientSet]:
    """Masked mean squared error and its exact gradient.

    loss = sum(mask * (target - Q)^2) / sum(mask)
    """
    x, _ = _as_batch(net, states)
    t = np.asarray(targets, dtype=np.float64)
    m = np.asarray(mask, dtype=np.float64)
    if t.shape != (x.shape[0], N_ACTIONS) or m.shape != t.shape:
        raise ShapeError(f"targets {t.shape} and mask {m.shape} must be ({x.shape[0]}, {N_ACTIONS})")
    if not (np.isfinite(x).all() and np.isfinite(t).all() and np.isfinite(m).all()):
        raise NumericalError("non-finite value in states, targets or mask")
    count = m.sum()
    if count == 0:
        return 0.0, GradientSet([np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases])

    pre, acts, y = _forward_cache(net, x)
    diff = m * (y - t)
    loss = float((diff * (y - t)).sum() / count)

    gw = [None] * 4
    gb = [None] * 4
    delta = (2.0 / count) * diff * y * (1.0 - y)
    gw[3] = acts[3].T @ delta
    gb[3] = delta.sum(axis=0)
    for i in (2, 1, 0):
        delta = (delta @ net.weights[i + 1].T) * selu_grad(pre[i])
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
    return loss, GradientSet(gw, gb)


def sgd_step(net: QNetwork, grads: GradientSet, lr: float) -> QNetwork:
    """Plain gradient step p <- p - lr * g, applied in place; returns ``net``."""
    for p, g in zip(net.params(), grads.params()):
        p -= lr * g
    return net


@dataclass
class SGD:
    lr: float = 1e-3
    momentum: float = 0.0
    _velocity: list[np.ndarray] | None = field(default=None, repr=False)

    def step(self, net: QNetwork, grads: GradientSet) -> QNetwork:
        if self.momentum == 0.0:
            return sgd_step(net, grads, self.lr)
        if self._velocity is None:
            self._velocity = [np.zeros_like(p) for p in net.params()]
        for p, g, v in zip(net.params(), grads.params(), self._velocity):
            v *= self.momentum
            v += g
            p -= self.lr * v
        return net


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    _m: list[np.ndarray] | None = field(default=None, repr=False)
    _v: list[np.ndarray] | None = field(default=None, repr=False)
    _t: int = field(default=0, repr=False)

    def step(self, net: QNetwork, grads: GradientSet) -> QNetwork:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in net.params()]
            self._v = [np.zeros_like(p) for p in net.params()]
        self._t += 1
        c1 = 1.0 - self.beta1 ** self._t
        c2 = 1.0 - self.beta2 ** self._t
        for p, g, m, v in zip(net.params(), grads.params(), self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return net


def make_optimizer(kind: str, lr: float, momentum: float = 0.9):
    if kind == "sgd":
        return SGD(lr)
    if kind == "momentum":
        return SGD(lr, momentum)
    if kind == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {kind!r}")


def save_checkpoint(net: QNetwork, path: str | Path, extra: dict | None = None) -> None:
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "input_dim": net.input_dim,
        "hidden": net.hidden,
        "outputs": N_ACTIONS,
        "selu_lambda": SELU_LAMBDA,
        "selu_alpha": SELU_ALPHA,
        "extra": extra or {},
    }
    arrays = {f"W{i}": w for i, w in enumerate(net.weights)}
    arrays.update({f"b{i}": b for i, b in enumerate(net.biases)})
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path: str | Path) -> tuple[QNetwork, dict]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ShapeError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ShapeError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        if (meta["selu_lambda"], meta["selu_alpha"]) != (SELU_LAMBDA, SELU_ALPHA):
            raise ShapeError(f"{path}: activation constants differ from this build")
        net = QNetwork([data[f"W{i}"].astype(np.float64) for i in range(4)],
                       [data[f"b{i}"].astype(np.float64) for i in range(4)])
    if (net.input_dim, net.hidden) != (meta["input_dim"], meta["hidden"]):
        raise ShapeError(f"{path}: stored shapes disagree with the header")
    return net, meta.get("extra", {})
