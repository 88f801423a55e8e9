import numpy as np
import pytest

from dyqn.agent import AgentConfig
from dyqn.baselines.ensemble import EnsembleConfig, SupervisedModel, make_member, soft_labels, train_fully_observed
from dyqn.baselines.partial import CachedTriageModel, partially_observed_qvalues, train_partially_observed
from dyqn.baselines.policies import (
    expected_random_questions, green_actor, policy_always_green, policy_random, random_actor, run_fixed_policy,
)
from dyqn.baselines.powerset import subset_states
from dyqn.core import Action, Dataset
from dyqn.errors import ConfigError, NotFitted, SingleClassError
from dyqn.synthetic import GeneratorConfig, generate

from conftest import make_vignette

SMALL = EnsembleConfig(members=("logistic", "tree", "forest"), mlp_hidden=(16,), max_rows=4000)


@pytest.fixture(scope="module")
def split(small_synthetic):
    return small_synthetic.split(0.25, np.random.default_rng(0))


@pytest.fixture(scope="module")
def full_model(split):
    return train_fully_observed(split[0], SMALL, seed=0)


@pytest.fixture(scope="module")
def partial_model(split):
    return train_partially_observed(split[0], np.random.default_rng(0), SMALL, seed=0)


def test_soft_labels_are_decision_shares(toy_dataset):
    y = soft_labels(toy_dataset)
    assert y[0].tolist() == pytest.approx([0, 2 / 3, 1 / 3, 0])
    assert np.allclose(y.sum(axis=1), 1)


def test_logistic_member_separates_a_separable_set():
    X = np.array([[1, 0], [1, -1], [-1, 0], [-1, 1]] * 5, dtype=float)
    y = np.array([0, 0, 1, 1] * 5)
    member = make_member("logistic", SMALL, 0).fit(X, y)
    assert (member.predict(X) == y).all()


def test_probabilities_sum_to_one(full_model, rng):
    states = rng.integers(-1, 2, (100, full_model_dim(full_model)))
    p = full_model.predict_proba(states)
    assert p.shape == (100, 4)
    assert np.all(p >= 0)
    assert np.allclose(p.sum(axis=1), 1, rtol=0, atol=1e-9)


def full_model_dim(model):
    return model.members[0].folds[0][0].n_features_in_


def test_fully_observed_beats_chance(full_model, split):
    train, test = split
    pred = full_model.predict(test.states())
    hits = np.mean([v.appropriate_mask()[p] for v, p in zip(test, pred)])
    assert hits > 0.5


def test_member_order_does_not_matter(split):
    a = SupervisedModel(EnsembleConfig(members=("tree", "logistic")), seed=3).fit_dataset(split[0])
    b = SupervisedModel(EnsembleConfig(members=("logistic", "tree")), seed=3).fit_dataset(split[0])
    X = split[1].states()
    assert np.array_equal(a.predict_proba(X), b.predict_proba(X))


def test_single_class_raises():
    ds = Dataset(["e0", "e1"], [make_vignette(f"v{i}", [(i % 2, True)], (0, 0, 2, 0)) for i in range(10)])
    with pytest.raises(SingleClassError):
        train_fully_observed(ds, SMALL)


def test_unfitted_model_raises():
    with pytest.raises(NotFitted):
        SupervisedModel(SMALL).predict_proba(np.zeros((1, 3)))
    with pytest.raises(NotFitted):
        partially_observed_qvalues(SupervisedModel(SMALL), np.zeros(3))
    with pytest.raises(ConfigError):
        EnsembleConfig(members=("svm",))


def test_save_load_roundtrip(full_model, split, tmp_path):
    path = tmp_path / "m.pkl"
    full_model.save(path)
    back = SupervisedModel.load(path)
    X = split[1].states()
    assert np.array_equal(back.predict_proba(X), full_model.predict_proba(X))


def test_partial_model_zero_state_is_prior_like(partial_model, split):
    p = partially_observed_qvalues(partial_model, np.zeros(split[0].evidence_space))
    assert p.sum() == pytest.approx(1.0)
    prior = soft_labels(split[0]).mean(axis=0)
    assert np.all(np.abs(p - prior) < 0.15)


def test_confidence_grows_with_evidence_in_aggregate():
    # members trained on a few dozen vignettes disagree too much for the average to sharpen
    train, test = generate(GeneratorConfig(n_vignettes=200, seed=3)).split(0.2, np.random.default_rng(0))
    partial_model = train_partially_observed(train, np.random.default_rng(0), SMALL, seed=0)
    by_size: dict[int, list[float]] = {}
    for v in test:
        S = subset_states(v, test.evidence_space, max_items=8)
        if not len(S):
            continue
        conf = partial_model.predict_proba(S).max(axis=1)
        for size, c in zip(np.count_nonzero(S, axis=1), conf):
            by_size.setdefault(int(size), []).append(c)
    means = [np.mean(by_size[k]) for k in sorted(by_size) if len(by_size[k]) >= 20]
    assert means[-1] >= means[0]


def test_cached_model_matches_direct_calls(partial_model, split):
    cached = CachedTriageModel(partial_model)
    S = subset_states(split[1].vignettes[0], split[1].evidence_space)
    assert np.array_equal(cached(S), partial_model.predict_proba(S))
    n = len(cached)
    cached(S)
    assert len(cached) == n


def test_policy_random_is_uniform():
    rng = np.random.default_rng(0)
    draws = np.array([int(policy_random(rng)) for _ in range(100_000)])
    assert np.all(np.abs(np.bincount(draws, minlength=5) / len(draws) - 0.2) < 0.01)
    blocked = {int(policy_random(rng, ask_allowed=False)) for _ in range(1000)}
    assert blocked == {0, 1, 2, 3}
    assert policy_always_green() is Action.GREEN


def test_expected_random_questions():
    v = make_vignette("long", [(i, True) for i in range(30)], (0, 0, 1, 0))
    ds = Dataset([f"e{i}" for i in range(30)], [v])
    # k_max = 23 truncates a geometric tail that is already negligible
    assert expected_random_questions(ds, 23) == pytest.approx(0.25, abs=1e-12)
    short = Dataset(["a", "b"], [make_vignette("s", [(0, True), (1, True)], (1, 0, 0, 0))])
    assert expected_random_questions(short, 23) == pytest.approx(0.2)


def test_fixed_policies_log_like_the_agent(split):
    train, test = split
    cfg = AgentConfig(total_steps=500, eval_every=250)
    green = run_fixed_policy(train, test, lambda _rng: green_actor(), cfg, np.random.default_rng(0))
    rows = [r for r in green.log if r["split"] == "test"]
    assert len(rows) == 2
    expect = np.mean([v.appropriate_mask()[2] for v in test])
    assert all(r["appropriateness"] == pytest.approx(expect) and r["avg_questions"] == 0 for r in rows)
    rnd = run_fixed_policy(train, test, random_actor, cfg, np.random.default_rng(0))
    assert all(r["appropriateness"] <= r["safety"] for r in rnd.log)
