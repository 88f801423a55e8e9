"""Powerset expansion of vignettes into partially observed training examples.

A vignette with n <= 10 evidence items yields every subset (2^n vignettes).
Beyond that, k = n - 10 items are held out in a random order and every subset
v of the remaining ten is combined with each non-empty prefix of the held-out
items: v + {h1}, v + {h1, h2}, ..., v + {h1..hk}. That gives exactly
k * 2^10 vignettes and always includes the complete vignette. Every expanded
vignette keeps its parent's expert decisions.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ..core import Dataset, Vignette


def expanded_count(n_evidence: int, cap_exponent: int = 10) -> int:
    return max(1, n_evidence - cap_exponent) * 2 ** min(n_evidence, cap_exponent)


def powerset_subsets(n: int, rng: np.random.Generator, cap_exponent: int = 10) -> list[tuple[int, ...]]:
    """Index subsets of ``range(n)`` following the capped expansion rule."""
    if n <= cap_exponent:
        base, held = list(range(n)), []
    else:
        order = [int(i) for i in rng.permutation(n)]
        held = order[: n - cap_exponent]
        base = sorted(order[n - cap_exponent:])
    nb = len(base)
    out = []
    for mask in range(2 ** nb):
        v = [base[j] for j in range(nb) if mask >> j & 1]
        if not held:
            out.append(tuple(v))
        else:
            for j in range(1, len(held) + 1):
                out.append(tuple(sorted(v + held[:j])))
    return out


def expand_powerset(vignette: Vignette, rng: np.random.Generator, cap_exponent: int = 10) -> list[Vignette]:
    ev = vignette.evidence
    subsets = powerset_subsets(len(ev), rng, cap_exponent)
    return [Vignette(f"{vignette.id}/p{k}", tuple(ev[i] for i in sub), vignette.decisions)
            for k, sub in enumerate(subsets)]


def expand_dataset(dataset: Dataset, rng: np.random.Generator, cap_exponent: int = 10) -> Dataset:
    out: list[Vignette] = []
    for v in dataset:
        out.extend(expand_powerset(v, rng, cap_exponent))
    return Dataset(list(dataset.evidence_registry), out)


def powerset_matrix(vignettes: Sequence[Vignette], evidence_space: int, rng: np.random.Generator,
                    cap_exponent: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """States of the expanded set and, for each row, the index of its parent vignette.

    Same expansion as ``expand_dataset`` without building Vignette objects.
    """
    blocks, parents = [], []
    for k, v in enumerate(vignettes):
        subsets = powerset_subsets(len(v.evidence), rng, cap_exponent)
        idx = np.array([e.index for e in v.evidence])
        val = np.array([e.value for e in v.evidence], dtype=np.int8)
        block = np.zeros((len(subsets), evidence_space), dtype=np.int8)
        for r, sub in enumerate(subsets):
            if sub:
                s = list(sub)
                block[r, idx[s]] = val[s]
        blocks.append(block)
        parents.append(np.full(len(subsets), k))
    return np.concatenate(blocks), np.concatenate(parents)


def subset_states(vignette: Vignette, evidence_space: int, max_items: int = 12) -> np.ndarray:
    """Every non-empty evidence subset as a state (only for vignettes with at most ``max_items`` items)."""
    n = len(vignette.evidence)
    if n > max_items:
        return np.zeros((0, evidence_space), dtype=np.int8)
    idx = np.array([e.index for e in vignette.evidence])
    val = np.array([e.value for e in vignette.evidence], dtype=np.int8)
    masks = np.arange(1, 2 ** n)
    bits = (masks[:, None] >> np.arange(n)) & 1
    out = np.zeros((len(masks), evidence_space), dtype=np.int8)
    out[:, idx] = bits * val
    return out

