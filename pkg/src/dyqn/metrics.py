"""Appropriateness, safety, question counts and the inter-expert human baseline."""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import asdict, dataclass

from .core import DecisionBag, Dataset, TriageLevel, urgency_bounds
from .errors import NoQualifyingVignettes


@dataclass(frozen=True)
class EpisodeResult:
    vignette_id: str
    decision: TriageLevel
    questions_asked: int


@dataclass(frozen=True)
class MetricReport:
    appropriateness: float
    safety: float
    avg_questions: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def is_appropriate(decision: TriageLevel | int, bag: DecisionBag) -> bool:
    most, least = urgency_bounds(bag)
    return most <= decision <= least


def is_safe(decision: TriageLevel | int, bag: DecisionBag) -> bool:
    """At or more urgent than the least urgent expert decision."""
    return decision <= urgency_bounds(bag)[1]


def _report(results: Sequence[EpisodeResult], bags: Sequence[DecisionBag]) -> MetricReport:
    n = len(results)
    if n == 0:
        return MetricReport(0.0, 0.0, 0.0, 0)
    app = sum(is_appropriate(r.decision, b) for r, b in zip(results, bags))
    safe = sum(is_safe(r.decision, b) for r, b in zip(results, bags))
    questions = sum(r.questions_asked for r in results)
    return MetricReport(app / n, safe / n, questions / n, n)


def aggregate(results: Sequence[EpisodeResult], dataset: Dataset) -> MetricReport:
    bags = [dataset[r.vignette_id].decisions for r in results]
    return _report(results, bags)


class SlidingWindow:
    """Running report over the most recent ``window`` episodes."""

    def __init__(self, dataset: Dataset, window: int = 20):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.dataset = dataset
        self._items: deque[tuple[EpisodeResult, DecisionBag]] = deque(maxlen=window)

    def push(self, result: EpisodeResult) -> MetricReport:
        self._items.append((result, self.dataset[result.vignette_id].decisions))
        return self.report()

    def report(self) -> MetricReport:
        return _report([r for r, _ in self._items], [b for _, b in self._items])


def sliding_window(results: Iterable[EpisodeResult], dataset: Dataset, window: int = 20) -> Iterator[MetricReport]:
    win = SlidingWindow(dataset, window)
    for r in results:
        yield win.push(r)


def leave_one_out_agreement(bag: DecisionBag) -> tuple[float, float]:
    """Fraction of single expert decisions that are appropriate / safe against the remaining experts."""
    app = safe = 0
    for level in TriageLevel:
        m = bag[level]
        if m == 0:
            continue
        rest = bag.remove_one(level)
        if rest.total == 0:
            continue
        app += m * is_appropriate(level, rest)
        safe += m * is_safe(level, rest)
    return app / bag.total, safe / bag.total


def human_baseline(dataset: Dataset | Iterable, min_decisions: int = 3) -> tuple[float, float]:
    """Vignette-averaged leave-one-out expert agreement over bags with at least ``min_decisions`` decisions."""
    bags = [v.decisions for v in dataset if v.decisions.total >= max(min_decisions, 2)]
    if not bags:
        raise NoQualifyingVignettes(f"no vignette has {min_decisions} or more expert decisions")
    pairs = [leave_one_out_agreement(b) for b in bags]
    return sum(p[0] for p in pairs) / len(pairs), sum(p[1] for p in pairs) / len(pairs)
