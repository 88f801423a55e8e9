"""Command line entry point: ``dyqn <subcommand> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..baselines.ensemble import SupervisedModel
from ..baselines.powerset import expand_dataset
from ..core import Dataset, loads_dataset
from ..errors import DyqnError
from ..network import load_checkpoint
from ..synthetic import generate_with_truth
from .config import AGENTS, ExperimentConfig, dump_config, load_config
from .runner import evaluate_checkpoint, run_agent, run_compare, run_kfold, write_run

log = logging.getLogger("dyqn")


def _load_dataset(path: str, allow_empty: bool = False) -> Dataset:
    return loads_dataset(Path(path).read_text(), source=path, allow_empty_evidence=allow_empty)


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed, data=dataclasses.replace(cfg.data, seed=args.seed))
    return cfg


def _split(dataset: Dataset, cfg: ExperimentConfig):
    return dataset.split(cfg.test_fraction, np.random.default_rng([cfg.seed, 1]))


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    dataset, truth = generate_with_truth(cfg.data)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.save(out)
    truth.save(out.with_suffix(".truth.json"))
    print(f"wrote {len(dataset)} vignettes to {out}")
    return 0


def cmd_expand_pow(args) -> int:
    cfg = _config(args)
    dataset = _load_dataset(args.dataset)
    expanded = expand_dataset(dataset, np.random.default_rng(cfg.seed))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    expanded.save(args.out)
    print(f"expanded {len(dataset)} vignettes into {len(expanded)}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    train_set, test_set = _split(_load_dataset(args.dataset), cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "resolved-config.yaml")
    run = run_agent(args.agent, train_set, test_set, cfg, cfg.seed)
    write_run(run, out)
    print(json.dumps(run.summary, indent=2, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    dataset = _load_dataset(args.dataset)
    ckpt = Path(args.checkpoint)
    if ckpt.is_dir():
        ckpt = ckpt / "checkpoint.npz"
    net, _ = load_checkpoint(ckpt)
    triage_path = ckpt.parent / "triage_model.pkl"
    triage = SupervisedModel.load(triage_path) if triage_path.exists() else None
    report = evaluate_checkpoint(net, dataset, cfg, cfg.seed, triage)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "eval.json").write_text(text + "\n")
    print(text)
    return 0


def cmd_kfold(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "resolved-config.yaml")
    summary = run_kfold(_load_dataset(args.dataset), cfg, out, args.agent, args.k, args.repeats)
    print(json.dumps({k: v for k, v in summary.items() if k != "per_fold"}, indent=2, sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    if args.agent:
        cfg = dataclasses.replace(cfg, compare_agents=tuple(args.agent))
    train_set, test_set = _split(_load_dataset(args.dataset), cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "resolved-config.yaml")
    for row in run_compare(train_set, test_set, cfg, out):
        print(",".join(str(row[k]) for k in row))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyqn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, dataset=True, out=True, agent=False):
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        if dataset:
            p.add_argument("--dataset", required=True)
        if out:
            p.add_argument("--out", required=True)
        if agent:
            p.add_argument("--agent", default="dyqn-or", choices=AGENTS)
        p.set_defaults(func=func)
        return p

    add("gen-data", cmd_gen_data, dataset=False)
    add("expand-pow", cmd_expand_pow)
    add("train", cmd_train, agent=True)
    p = add("eval", cmd_eval, out=False)
    p.add_argument("--checkpoint", required=True, help="checkpoint.npz or a train output directory")
    p.add_argument("--out")
    p = add("kfold", cmd_kfold, agent=True)
    p.add_argument("--k", type=int)
    p.add_argument("--repeats", type=int)
    p = add("compare", cmd_compare)
    p.add_argument("--agent", action="append", choices=AGENTS, help="restrict to these agents (repeatable)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (DyqnError, OSError) as exc:
        print(f"dyqn {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
