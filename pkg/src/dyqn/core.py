"""Evidence space, triage levels, actions, vignettes and the ternary state encoding."""

from __future__ import annotations

import enum
import json
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DatasetFormatError,
    DuplicateEvidence,
    EmptyDecisionBag,
    UnknownEvidence,
    UnknownVignette,
)

N_TRIAGE = 4
N_ACTIONS = 5


class TriageLevel(enum.IntEnum):
    """Triage levels, most urgent first. Smaller value means more urgent."""

    RED = 0
    YELLOW = 1
    GREEN = 2
    BLUE = 3


class Action(enum.IntEnum):
    """The four triage decisions plus ``ASK``. Triage members share values with ``TriageLevel``."""

    RED = 0
    YELLOW = 1
    GREEN = 2
    BLUE = 3
    ASK = 4

    @property
    def is_triage(self) -> bool:
        return self is not Action.ASK

    @property
    def level(self) -> TriageLevel:
        if self is Action.ASK:
            raise ValueError("ASK has no triage level")
        return TriageLevel(int(self))

    @classmethod
    def triage(cls, level: TriageLevel | int) -> Action:
        return cls(int(TriageLevel(level)))


# StateVector: dense int8 array over {-1, 0, +1}
StateVector = np.ndarray


@dataclass(frozen=True, order=True)
class EvidenceAssignment:
    index: int
    present: bool

    @property
    def value(self) -> int:
        return 1 if self.present else -1


@dataclass(frozen=True)
class DecisionBag:
    """Multiset of expert triage decisions, stored as per-level multiplicities."""

    counts: tuple[int, int, int, int] = (0, 0, 0, 0)

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != N_TRIAGE:
            raise ValueError(f"expected {N_TRIAGE} multiplicities, got {len(counts)}")
        if any(c < 0 for c in counts):
            raise ValueError(f"negative multiplicity in {counts}")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_mapping(cls, mapping: Mapping[TriageLevel | str | int, int]) -> DecisionBag:
        counts = [0] * N_TRIAGE
        for key, n in mapping.items():
            if isinstance(key, str):
                level = TriageLevel[key.upper()]
            else:
                level = TriageLevel(key)
            counts[level] += int(n)
        return cls(tuple(counts))

    @classmethod
    def from_levels(cls, levels: Iterable[TriageLevel | int]) -> DecisionBag:
        counts = [0] * N_TRIAGE
        for level in levels:
            counts[TriageLevel(level)] += 1
        return cls(tuple(counts))

    @property
    def total(self) -> int:
        return sum(self.counts)

    def __len__(self) -> int:
        return self.total

    def __getitem__(self, level: TriageLevel | int) -> int:
        return self.counts[int(level)]

    def levels(self) -> list[TriageLevel]:
        """Expand the multiset into one entry per decision, most urgent first."""
        return [TriageLevel(i) for i, c in enumerate(self.counts) for _ in range(c)]

    def remove_one(self, level: TriageLevel | int) -> DecisionBag:
        counts = list(self.counts)
        if counts[int(level)] == 0:
            raise ValueError(f"{TriageLevel(level).name} not in bag")
        counts[int(level)] -= 1
        return DecisionBag(tuple(counts))

    def to_json(self) -> dict[str, int]:
        return {level.name.lower(): self.counts[level] for level in TriageLevel}


@dataclass(frozen=True)
class Vignette:
    id: str
    evidence: tuple[EvidenceAssignment, ...]
    decisions: DecisionBag

    def __post_init__(self):
        object.__setattr__(self, "evidence", tuple(self.evidence))
        seen = set()
        for item in self.evidence:
            if item.index in seen:
                raise DuplicateEvidence(f"vignette {self.id!r}: evidence {item.index} listed twice")
            seen.add(item.index)
        if self.decisions.total == 0:
            raise EmptyDecisionBag(f"vignette {self.id!r} has no expert decisions")

    def appropriate_mask(self) -> np.ndarray:
        """Boolean mask over triage levels lying between the bag's urgency bounds."""
        most, least = urgency_bounds(self.decisions)
        mask = np.zeros(N_TRIAGE, dtype=bool)
        mask[most : least + 1] = True
        return mask


@dataclass
class Dataset:
    evidence_registry: list[str]
    vignettes: list[Vignette]
    _by_id: dict[str, Vignette] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.vignettes = list(self.vignettes)
        self._by_id = {}
        n = len(self.evidence_registry)
        for v in self.vignettes:
            if v.id in self._by_id:
                raise ValueError(f"duplicate vignette id {v.id!r}")
            self._by_id[v.id] = v
            for item in v.evidence:
                if not 0 <= item.index < n:
                    raise UnknownEvidence(f"vignette {v.id!r}: evidence index {item.index} not registered")

    @property
    def evidence_space(self) -> int:
        return len(self.evidence_registry)

    def __len__(self) -> int:
        return len(self.vignettes)

    def __iter__(self):
        return iter(self.vignettes)

    def __getitem__(self, vignette_id: str) -> Vignette:
        try:
            return self._by_id[vignette_id]
        except KeyError:
            raise UnknownVignette(vignette_id) from None

    def __contains__(self, vignette_id: str) -> bool:
        return vignette_id in self._by_id

    def subset(self, indices: Iterable[int]) -> Dataset:
        return Dataset(list(self.evidence_registry), [self.vignettes[i] for i in indices])

    def split(self, test_fraction: float, rng: np.random.Generator) -> tuple[Dataset, Dataset]:
        """Seeded train/test split; the test side gets ``round(n * test_fraction)`` vignettes (at least one)."""
        n = len(self.vignettes)
        n_test = min(n - 1, max(1, int(round(n * test_fraction))))
        order = rng.permutation(n)
        test_idx = np.sort(order[:n_test])
        train_idx = np.sort(order[n_test:])
        return self.subset(train_idx), self.subset(test_idx)

    def states(self) -> np.ndarray:
        """Full-evidence state matrix, one row per vignette."""
        return np.stack([encode_state(v.evidence, self.evidence_space) for v in self.vignettes])

    def to_json(self) -> dict:
        names = self.evidence_registry
        return {
            "evidence": list(names),
            "vignettes": [
                {
                    "id": v.id,
                    "evidence": [{"name": names[e.index], "present": e.present} for e in v.evidence],
                    "decisions": v.decisions.to_json(),
                }
                for v in self.vignettes
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> Dataset:
        return loads_dataset(Path(path).read_text(), source=str(path))


def encode_state(revealed: Iterable[EvidenceAssignment], evidence_space: int) -> StateVector:
    """Ternary state: +1 present, -1 absent, 0 unobserved."""
    state = np.zeros(evidence_space, dtype=np.int8)
    for item in revealed:
        if not 0 <= item.index < evidence_space:
            raise UnknownEvidence(f"evidence index {item.index} outside [0, {evidence_space})")
        if state[item.index] != 0:
            raise DuplicateEvidence(f"evidence index {item.index} revealed twice")
        state[item.index] = item.value
    return state


def decode_state(state: StateVector) -> set[EvidenceAssignment]:
    idx = np.flatnonzero(state)
    return {EvidenceAssignment(int(i), bool(state[i] > 0)) for i in idx}


def urgency_bounds(bag: DecisionBag) -> tuple[TriageLevel, TriageLevel]:
    """(most urgent, least urgent) decision in the bag."""
    present = [i for i, c in enumerate(bag.counts) if c > 0]
    if not present:
        raise EmptyDecisionBag("urgency bounds of an empty bag")
    return TriageLevel(present[0]), TriageLevel(present[-1])


def _line_of(text: str, pattern: str) -> int | None:
    m = re.search(pattern, text)
    if m is None:
        return None
    return text.count("\n", 0, m.start()) + 1


def loads_dataset(text: str, source: str = "<string>", allow_empty_evidence: bool = False) -> Dataset:
    """Parse and validate a dataset JSON document.

    Errors name the offending vignette and, where it can be located, the line in ``text``.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from exc

    def fail(msg: str, vid: str | None = None) -> DatasetFormatError:
        line = _line_of(text, r'"id"\s*:\s*' + re.escape(json.dumps(vid))) if vid is not None else None
        where = f"{source}:{line}" if line is not None else source
        return DatasetFormatError(f"{where}: {msg}")

    if not isinstance(doc, dict) or "evidence" not in doc or "vignettes" not in doc:
        raise fail("expected an object with 'evidence' and 'vignettes' keys")
    names = doc["evidence"]
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise fail("'evidence' must be a list of names")
    index = {}
    for i, name in enumerate(names):
        if name in index:
            raise DatasetFormatError(f"{source}:{_line_of(text, re.escape(json.dumps(name)))}: "
                                     f"evidence name {name!r} registered twice")
        index[name] = i

    vignettes = []
    for k, raw in enumerate(doc["vignettes"]):
        vid = raw.get("id") if isinstance(raw, dict) else None
        if not isinstance(vid, str):
            raise fail(f"vignette #{k} has no string id")
        items = []
        for ev in raw.get("evidence", []):
            name = ev.get("name")
            if name not in index:
                raise fail(f"vignette {vid!r}: unknown evidence {name!r}", vid)
            present = ev.get("present")
            if not isinstance(present, bool):
                raise fail(f"vignette {vid!r}: evidence {name!r} needs a boolean 'present'", vid)
            items.append(EvidenceAssignment(index[name], present))
        if not items and not allow_empty_evidence:
            raise fail(f"vignette {vid!r} has no evidence", vid)
        decisions = raw.get("decisions", {})
        try:
            bag = DecisionBag.from_mapping(decisions)
            vignettes.append(Vignette(vid, tuple(items), bag))
        except (KeyError, ValueError) as exc:
            raise fail(f"vignette {vid!r}: {exc}", vid) from exc
    try:
        return Dataset(list(names), vignettes)
    except ValueError as exc:
        raise fail(str(exc)) from exc


def bags_matrix(vignettes: Sequence[Vignette]) -> np.ndarray:
    """(n, 4) integer multiplicities."""
    return np.array([v.decisions.counts for v in vignettes], dtype=np.int64)
