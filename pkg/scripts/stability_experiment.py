#!/usr/bin/env python3
"""Paired stability comparison: hybrid schedule vs pure-online DQN.

For each seed, trains both arms from the same pretrained checkpoint and
compares the variance of windowed online win rates. Writes a JSONL summary.

    python scripts/stability_experiment.py /tmp/stab [n_pairs] [episodes]
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from arenarl.config import (
    DqnConfig,
    EncoderLimits,
    GameConfig,
    HybridSchedule,
    ModelConfig,
    OptimizerConfig,
)
from arenarl.datasets import record_demos, split as split_dataset
from arenarl.evaluation import stability
from arenarl.model import PolicyModel
from arenarl.scripted import make_policy
from arenarl.training import encode_split, run_hybrid_training, run_pretraining
from arenarl.cli import _load_config  # reuse the CLI's config loader
import argparse

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "desk.cfg"
WINDOW = 10


def run(out_dir: str, n_pairs: str = "3", episodes: str = "120") -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    args = argparse.Namespace(config=str(CONFIG), seed=None, set=None)
    run_cfg = _load_config(args)
    game, limits = run_cfg.game, run_cfg.limits

    dataset = record_demos(
        make_policy("rule"), make_policy("rule2"), 50, game, seed=100
    )
    train_ds, val_ds = split_dataset(dataset, 0.2, seed=0)
    train = encode_split(train_ds, limits, game)
    val = encode_split(val_ds, limits, game)
    base = PolicyModel(run_cfg.model, limits, seed=0)
    run_pretraining(base, train, val, epochs=100, optimizer_config=run_cfg.optimizer, seed=0)
    base_state = base.state_dict()

    results = []
    for pair in range(int(n_pairs)):
        row = {"pair": pair}
        for label, (r0, r1) in (("hybrid", (0.8, 0.2)), ("pure_online", (0.0, 0.0))):
            model = PolicyModel(run_cfg.model, limits, seed=0)
            model.load_state_dict(base_state)
            schedule = HybridSchedule(
                total_episodes=int(episodes), r_initial=r0, r_final=r1, phase_length=50
            )
            t0 = time.perf_counter()
            log = run_hybrid_training(
                model, schedule, dataset, game, run_cfg.dqn, run_cfg.rewards,
                opponent=make_policy("rule"), limits=limits, seed=1000 + pair,
                bc_optimizer_config=run_cfg.optimizer,
                q_optimizer_config=OptimizerConfig(learning_rate=1e-4),
            )
            rates = log.win_rates(WINDOW)
            row[label] = {
                "windows": rates,
                "variance": stability(rates) if len(rates) >= 2 else None,
                "seconds": round(time.perf_counter() - t0, 1),
            }
            print(f"pair {pair} {label}: windows {rates} -> var {row[label]['variance']}")
        results.append(row)

    summary = out / "stability.jsonl"
    with summary.open("w") as fh:
        for row in results:
            fh.write(json.dumps(row) + "\n")
    wins = sum(
        1 for row in results
        if row["hybrid"]["variance"] is not None
        and row["pure_online"]["variance"] is not None
        and row["hybrid"]["variance"] <= row["pure_online"]["variance"]
    )
    print(f"hybrid variance <= pure-online in {wins}/{len(results)} pairs -> {summary}")
    return 0


if __name__ == "__main__":
    if len(sys.argv) < 2:
        print(__doc__)
        sys.exit(1)
    sys.exit(run(*sys.argv[1:]))
