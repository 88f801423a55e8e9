"""Run the desk-scale comparison table on a synthetic dataset.

    python3 scripts/desk_compare.py --out runs/desk [--config configs/desk.yaml] [--agent dyqn-or ...]
"""

import argparse
import dataclasses
import logging
from pathlib import Path

import numpy as np

from dyqn.harness.config import dump_config, load_config
from dyqn.harness.runner import run_compare
from dyqn.synthetic import generate

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", default=ROOT / "configs" / "desk.yaml")
    parser.add_argument("--out", required=True)
    parser.add_argument("--agent", action="append", help="restrict to these agents (repeatable)")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = load_config(args.config)
    if args.agent:
        cfg = dataclasses.replace(cfg, compare_agents=tuple(args.agent))
    dataset = generate(cfg.data)
    train, test = dataset.split(cfg.test_fraction, np.random.default_rng([cfg.seed, 1]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset.save(out / "dataset.json")
    dump_config(cfg, out / "resolved-config.yaml")

    rows = run_compare(train, test, cfg, out)
    print(f"{'agent':16s} {'approp.':>8s} {'safety':>8s} {'questions':>10s}")
    for r in rows:
        q = r["avg_questions"] if isinstance(r["avg_questions"], str) else f"{r['avg_questions']:.2f}"
        print(f"{r['agent']:16s} {r['appropriateness']:8.3f} {r['safety']:8.3f} {q:>10s}")


if __name__ == "__main__":
    main()
