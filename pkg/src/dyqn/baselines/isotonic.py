"""Least-squares isotonic regression by pool-adjacent-violators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyFit


def pava(y, weights=None) -> np.ndarray:
    """Non-decreasing sequence minimising sum w_i (y_i - f_i)^2."""
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64)
    if y.shape != w.shape:
        raise ValueError("y and weights differ in shape")
    # each block: (weighted mean, total weight, length)
    means: list[float] = []
    wsum: list[float] = []
    lens: list[int] = []
    for yi, wi in zip(y, w):
        means.append(yi)
        wsum.append(wi)
        lens.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            w2 = wsum[-2] + wsum[-1]
            m2 = (means[-2] * wsum[-2] + means[-1] * wsum[-1]) / w2 if w2 > 0 else (means[-2] + means[-1]) / 2
            n2 = lens[-2] + lens[-1]
            del means[-1], wsum[-1], lens[-1]
            means[-1], wsum[-1], lens[-1] = m2, w2, n2
    return np.repeat(means, lens)


@dataclass(frozen=True)
class IsotonicMap:
    """Piecewise-linear non-decreasing map; constant beyond the fitted range."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        out = np.interp(np.asarray(x, dtype=np.float64), self.breakpoints, self.values)
        return float(out) if np.ndim(out) == 0 else out


def isotonic_fit(scores, targets, weights=None) -> IsotonicMap:
    """Fit a calibration map from (score, target) pairs.

    Points sharing a score are pooled first (weighted mean), so the map is a
    function of the score.
    """
    x = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyFit("isotonic fit needs at least one point")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
    if not (x.shape == y.shape == w.shape):
        raise ValueError("scores, targets and weights must have equal length")
    order = np.argsort(x, kind="stable")
    x, y, w = x[order], y[order], w[order]
    ux, start = np.unique(x, return_index=True)
    wsum = np.add.reduceat(w, start)
    ysum = np.add.reduceat(w * y, start)
    counts = np.diff(np.append(start, len(x)))
    ymean = np.where(wsum > 0, ysum / np.where(wsum > 0, wsum, 1), np.add.reduceat(y, start) / counts)
    fitted = pava(ymean, wsum)
    return IsotonicMap(ux, fitted)
