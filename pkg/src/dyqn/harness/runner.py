"""Run agents on a split, summarise their logs, and drive K-fold and comparison experiments."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agent import DyQNAgent, evaluate, train
from ..core import Dataset, TriageLevel
from ..errors import ConfigError
from ..memory import PrioritizedMemory
from ..metrics import EpisodeResult, aggregate, human_baseline
from ..network import QNetwork, save_checkpoint
from ..baselines.ensemble import SupervisedModel, train_fully_observed
from ..baselines.partial import CachedTriageModel, train_partially_observed
from ..baselines.policies import green_actor, random_actor, run_fixed_policy
from .config import AGENTS, ExperimentConfig

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("step", "split", "appropriateness", "safety", "avg_questions", "loss", "sigma")
METRICS = ("appropriateness", "safety", "avg_questions")
LEARNING_AGENTS = ("dyqn-or", "dyqn-and", "partial-or", "partial-and")
FULL_EVIDENCE_AGENTS = ("fully-observed", "human-baseline")


@dataclass
class AgentRun:
    agent: str
    log: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    net: QNetwork | None = None
    triage_model: SupervisedModel | None = None


def ci95(values) -> float:
    """Normal-approximation half width, 1.96 * s / sqrt(n)."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) < 2:
        return 0.0
    return float(1.96 * values.std(ddof=1) / math.sqrt(len(values)))


def _stats(rows: list[dict], key: str) -> dict:
    vals = [float(r[key]) for r in rows]
    return {"mean": float(np.mean(vals)), "ci95": ci95(vals), "min": float(min(vals)), "max": float(max(vals))}


def summarize(rows: list[dict], last_n: int = 10) -> dict:
    """Means and spreads over the final ``last_n`` evaluations of each split."""
    out: dict = {}
    for split in ("test", "train"):
        tail = [r for r in rows if r["split"] == split][-last_n:]
        if not tail:
            continue
        block = {"n": len(tail)}
        for key in METRICS:
            block[key] = _stats(tail, key)
        out[split] = block
    return out


def write_metrics_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: r[k] for k in METRIC_COLUMNS})


def read_metrics_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["step"] = int(r["step"])
        for k in ("appropriateness", "safety", "avg_questions", "loss", "sigma"):
            r[k] = float(r[k]) if r[k] != "" else float("nan")
    return rows


def _agent_config(cfg: ExperimentConfig, name: str):
    kind = name.rsplit("-", 1)[1]
    return dataclasses.replace(cfg.agent, query_kind=kind, train_triage_heads=name.startswith("dyqn"))


def _memory(cfg: ExperimentConfig, state_dim: int) -> PrioritizedMemory:
    m = cfg.memory
    return PrioritizedMemory(state_dim, m.capacity, m.thresholds, m.probs, m.decay)


def run_agent(name: str, train_set: Dataset, test_set: Dataset, cfg: ExperimentConfig, seed: int) -> AgentRun:
    if name not in AGENTS:
        raise ConfigError(f"unknown agent {name!r}; choose from {', '.join(AGENTS)}")
    rng = np.random.default_rng(seed)
    run = AgentRun(name)
    E = train_set.evidence_space

    if name in LEARNING_AGENTS:
        acfg = _agent_config(cfg, name)
        init_rng, model_rng, train_rng = rng.spawn(3)
        net = QNetwork.init(E, acfg.hidden, init_rng)
        triage = None
        if name.startswith("partial"):
            run.triage_model = train_partially_observed(train_set, model_rng, cfg.ensemble, seed)
            triage = CachedTriageModel(run.triage_model)
            triage.prewarm_dataset(train_set)
            triage.prewarm_dataset(test_set)
        result = train(train_set, test_set, acfg, _memory(cfg, E), net, train_rng, triage)
        run.net, run.log = result.net, result.log
    elif name in ("random", "always-green"):
        make = random_actor if name == "random" else (lambda _rng: green_actor())
        run.log = run_fixed_policy(train_set, test_set, make, cfg.agent, rng).log
    elif name == "fully-observed":
        run.triage_model = train_fully_observed(train_set, cfg.ensemble, seed)
        pred = run.triage_model.predict(test_set.states())
        results = [EpisodeResult(v.id, TriageLevel(int(p)), 0) for v, p in zip(test_set, pred)]
        report = aggregate(results, test_set)
        run.log = [{"step": 0, "split": "test", "appropriateness": report.appropriateness,
                    "safety": report.safety, "avg_questions": float("nan"), "loss": float("nan"),
                    "sigma": float("nan")}]
    else:
        h_a, h_s = human_baseline(test_set, cfg.min_decisions)
        run.log = [{"step": 0, "split": "test", "appropriateness": h_a, "safety": h_s,
                    "avg_questions": float("nan"), "loss": float("nan"), "sigma": float("nan")}]
    run.summary = {"agent": name, "seed": seed, **summarize(run.log, cfg.last_n)}
    if name in FULL_EVIDENCE_AGENTS:
        run.summary["test"]["avg_questions"] = "full"
    return run


def write_run(run: AgentRun, out: str | Path) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(run.log, out / "metrics.csv")
    (out / "summary.json").write_text(json.dumps(run.summary, indent=2, sort_keys=True) + "\n")
    if run.net is not None:
        save_checkpoint(run.net, out / "checkpoint.npz", extra={"agent": run.agent})
    if run.triage_model is not None:
        run.triage_model.save(out / "triage_model.pkl")


def evaluate_checkpoint(net: QNetwork, dataset: Dataset, cfg: ExperimentConfig, seed: int,
                        triage_model: SupervisedModel | None = None) -> dict:
    triage = CachedTriageModel(triage_model) if triage_model is not None else None
    agent = DyQNAgent(net, cfg.agent, triage)
    report = evaluate(agent, dataset, cfg.agent.k_max, np.random.default_rng(seed))
    return report.to_dict()


def fold_assignment(n: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    if n < k:
        raise ConfigError(f"dataset of {n} vignettes is smaller than k={k}")
    return [np.sort(f) for f in np.array_split(rng.permutation(n), k)]


def aggregate_kfold(csv_paths: list[Path], last_n: int = 10) -> dict:
    """Pool the final ``last_n`` test evaluations of every fold CSV."""
    pooled = []
    for p in csv_paths:
        rows = [r for r in read_metrics_csv(p) if r["split"] == "test"]
        pooled.extend(rows[-last_n:])
    if not pooled:
        raise ConfigError("no test evaluations found in the fold logs")
    return {"n": len(pooled), "folds": len(csv_paths), **{k: _stats(pooled, k) for k in METRICS}}


def run_kfold(dataset: Dataset, cfg: ExperimentConfig, out: str | Path, agent: str = "dyqn-or",
              k: int | None = None, repeats: int | None = None) -> dict:
    k = cfg.kfold_k if k is None else k
    repeats = cfg.kfold_repeats if repeats is None else repeats
    if k < 2:
        raise ConfigError("k must be >= 2")
    out = Path(out)
    paths, folds_summary = [], []
    seeds = np.random.SeedSequence(cfg.seed).spawn(repeats)
    for r, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        folds = fold_assignment(len(dataset), k, rng)
        for f, test_idx in enumerate(folds):
            train_idx = np.setdiff1d(np.arange(len(dataset)), test_idx)
            seed = int(rng.integers(2**31))
            log.info("repeat %d fold %d: %d train / %d test", r, f, len(train_idx), len(test_idx))
            run = run_agent(agent, dataset.subset(train_idx), dataset.subset(test_idx), cfg, seed)
            fold_dir = out / f"repeat{r}" / f"fold{f}"
            write_run(run, fold_dir)
            paths.append(fold_dir / "metrics.csv")
            folds_summary.append({"repeat": r, "fold": f, "n_test": len(test_idx), **run.summary})
    summary = {"agent": agent, "k": k, "repeats": repeats, **aggregate_kfold(paths, cfg.last_n),
               "per_fold": folds_summary}
    out.mkdir(parents=True, exist_ok=True)
    (out / "kfold_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


COMPARISON_COLUMNS = ("agent", "appropriateness", "appropriateness_ci95", "safety", "safety_ci95",
                      "avg_questions", "avg_questions_ci95", "n")


def comparison_row(run: AgentRun) -> dict:
    test = run.summary["test"]
    full = run.agent in FULL_EVIDENCE_AGENTS
    return {
        "agent": run.agent,
        "appropriateness": test["appropriateness"]["mean"],
        "appropriateness_ci95": "" if full else test["appropriateness"]["ci95"],
        "safety": test["safety"]["mean"],
        "safety_ci95": "" if full else test["safety"]["ci95"],
        "avg_questions": "full" if full else test["avg_questions"]["mean"],
        "avg_questions_ci95": "" if full else test["avg_questions"]["ci95"],
        "n": "" if full else test["n"],
    }


def run_compare(train_set: Dataset, test_set: Dataset, cfg: ExperimentConfig, out: str | Path) -> list[dict]:
    out = Path(out)
    rows = []
    for name in cfg.compare_agents:
        log.info("running %s", name)
        run = run_agent(name, train_set, test_set, cfg, cfg.seed)
        write_run(run, out / name)
        rows.append(comparison_row(run))
    with open(out / "comparison.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COMPARISON_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return rows
