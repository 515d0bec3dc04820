#!/usr/bin/env python3
"""Full-scale training protocol: 200 demo games, 300 BC epochs, 1000 hybrid
episodes, 100-episode evaluation against all three opponents.

This is the long run (expect hours of CPU time); the desk pipeline covers
day-to-day iteration.

    python scripts/paper_scale.py /tmp/full [seed]
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from arenarl.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "default.cfg"


def run(out_dir: str, seed: str = "1") -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    demos = out / "demos.jsonl"
    pretrained = out / "pretrained.npz"
    trained = out / "trained.npz"
    reports = out / "reports"

    steps = [
        ["collect", "--config", str(CONFIG), "--seed", seed, "--out", str(demos),
         "--episodes", "200", "--force"],
        ["pretrain", "--config", str(CONFIG), "--seed", seed, "--dataset", str(demos),
         "--out", str(pretrained), "--epochs", "300", "--force"],
        ["train", "--config", str(CONFIG), "--seed", seed, "--dataset", str(demos),
         "--model", str(pretrained), "--out", str(trained), "--episodes", "1000", "--force"],
        ["eval", "--config", str(CONFIG), "--seed", seed, "--model", str(trained),
         "--out", str(reports), "--episodes", "100", "--force"],
    ]
    for argv in steps:
        print(f"\n=== arenarl {' '.join(argv)}")
        code = main(argv)
        if code != 0:
            return code
    print(f"\nartifacts in {out}")
    return 0


if __name__ == "__main__":
    if len(sys.argv) < 2:
        print(__doc__)
        sys.exit(1)
    sys.exit(run(*sys.argv[1:]))
