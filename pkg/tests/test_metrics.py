import numpy as np
import pytest
from hypothesis import given, strategies as st

from dyqn.core import Dataset, DecisionBag, TriageLevel
from dyqn.errors import NoQualifyingVignettes
from dyqn.metrics import (
    EpisodeResult, SlidingWindow, aggregate, human_baseline, is_appropriate, is_safe, leave_one_out_agreement,
    sliding_window,
)

import oracles
from conftest import bags, make_vignette

levels = st.sampled_from(list(TriageLevel))


def test_appropriate_and_safe_examples():
    bag = DecisionBag((0, 2, 1, 0))
    assert [is_appropriate(d, bag) for d in TriageLevel] == [False, True, True, False]
    assert [is_safe(d, bag) for d in TriageLevel] == [True, True, True, False]


@given(levels, bags)
def test_metrics_match_brute_force(d, bag):
    assert is_appropriate(d, bag) == oracles.appropriate(int(d), bag.counts)
    assert is_safe(d, bag) == oracles.safe(int(d), bag.counts)
    # appropriate implies safe
    assert not is_appropriate(d, bag) or is_safe(d, bag)


@given(st.lists(st.tuples(bags, levels, st.integers(0, 23)), min_size=1, max_size=30))
def test_aggregate_matches_brute_force(rows):
    vignettes = [make_vignette(f"v{i}", [(0, True)], b.counts) for i, (b, _, _) in enumerate(rows)]
    ds = Dataset(["e0"], vignettes)
    results = [EpisodeResult(f"v{i}", d, q) for i, (_, d, q) in enumerate(rows)]
    report = aggregate(results, ds)
    n = len(rows)
    assert report.n == n
    assert report.appropriateness == pytest.approx(sum(oracles.appropriate(int(d), b.counts) for b, d, _ in rows) / n)
    assert report.safety == pytest.approx(sum(oracles.safe(int(d), b.counts) for b, d, _ in rows) / n)
    assert report.avg_questions == pytest.approx(sum(q for _, _, q in rows) / n)
    assert report.appropriateness <= report.safety


def test_sliding_window_keeps_last_results(toy_dataset):
    results = [EpisodeResult("b", TriageLevel.RED, 1), EpisodeResult("b", TriageLevel.BLUE, 3),
               EpisodeResult("a", TriageLevel.YELLOW, 5)]
    reports = list(sliding_window(results, toy_dataset, window=2))
    assert [r.appropriateness for r in reports] == [1.0, 0.5, 0.5]
    assert [r.avg_questions for r in reports] == [1.0, 2.0, 4.0]
    assert SlidingWindow(toy_dataset).report().n == 0
    with pytest.raises(ValueError):
        SlidingWindow(toy_dataset, window=0)


def test_leave_one_out_examples():
    # {Y, Y, G}: dropping a Y leaves {Y, G} (Y ok), dropping G leaves {Y, Y} (G too lax)
    assert leave_one_out_agreement(DecisionBag((0, 2, 1, 0))) == pytest.approx((2 / 3, 2 / 3))
    assert leave_one_out_agreement(DecisionBag((0, 0, 3, 0))) == (1.0, 1.0)
    # {R, B}: each vote is out of range of the other, but R is safe against {B}
    assert leave_one_out_agreement(DecisionBag((1, 0, 0, 1))) == (0.0, 0.5)


def test_human_baseline_filters_and_weights_vignettes_equally():
    ds = Dataset(["e"], [
        make_vignette("a", [(0, True)], (0, 2, 1, 0)),
        make_vignette("b", [(0, True)], (0, 0, 5, 0)),
        make_vignette("c", [(0, True)], (1, 1, 0, 0)),
    ])
    assert human_baseline(ds, 3) == pytest.approx(((2 / 3 + 1) / 2, (2 / 3 + 1) / 2))
    with pytest.raises(NoQualifyingVignettes):
        human_baseline(ds, 6)


@given(st.lists(bags, min_size=1, max_size=12), st.integers(2, 5))
def test_human_baseline_matches_brute_force(bag_list, min_decisions):
    ds = Dataset(["e"], [make_vignette(f"v{i}", [(0, True)], b.counts) for i, b in enumerate(bag_list)])
    if not any(b.total >= min_decisions for b in bag_list):
        with pytest.raises(NoQualifyingVignettes):
            human_baseline(ds, min_decisions)
        return
    got = human_baseline(ds, min_decisions)
    want = oracles.human_baseline([b.counts for b in bag_list], min_decisions)
    assert np.allclose(got, want, rtol=0, atol=1e-12)
    assert got[0] <= got[1]
