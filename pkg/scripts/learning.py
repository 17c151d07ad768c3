"""Option learning and composition on a grid world, phase by phase.

    python3 scripts/learning.py --slip 0.1 --out runs/learning.csv

Default maze is the packaged 15x15 fixture with desk-scale budgets.  Use
``--full`` for the 50x50, 45-reward room maze with K=2000 and L=150 (hours
on one core).
"""

import argparse
import csv

import numpy as np

from rdtsp.gridworld import (
    Maze, TrainConfig, evaluate_phases, fixture_maze, room_maze, train_options,
)

POLICIES = ("OPT", "RNN", "NN_RDFS", "NN_RA", "NN", "RAND")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--maze", help="maze text file; default is the packaged fixture")
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--slip", type=float, default=0.0)
    ap.add_argument("--K", type=int)
    ap.add_argument("--L", type=int)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eval-seeds", type=int, default=20)
    ap.add_argument("--every", type=int, default=5, help="evaluate policies every N phases")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out")
    a = ap.parse_args()

    budget = {"K": 2000, "L": 150} if a.full else {}
    budget.update({k: v for k, v in (("K", a.K), ("L", a.L)) if v})
    cfg = TrainConfig(slip=a.slip, **budget)
    if a.full:
        maze = room_maze(seed=a.seed)
    else:
        maze = Maze.load(a.maze) if a.maze else fixture_maze()
    opts, log = train_options(maze, cfg, seed=a.seed, workers=a.workers)
    phases = sorted(set(range(0, len(log.snapshots), a.every)) | {len(log.snapshots) - 1})
    rows = evaluate_phases(maze, log, opts.gamma, POLICIES, range(a.eval_seeds), a.slip, phases)

    by_phase = {}
    for r in log.rows:
        by_phase.setdefault(r["phase"], []).append(r)
    print(f"{'phase':>5s} {'success':>8s} {'gap':>7s}  " + " ".join(f"{p:>8s}" for p in POLICIES))
    for k in phases:
        succ = np.mean([r["success"] for r in by_phase[k]])
        gap = np.nanmean([r["gap"] for r in by_phase[k]])
        ret = {r["policy"]: r["mean_return"] for r in rows if r["phase"] == k}
        print(f"{k:5d} {succ:8.4f} {gap:7.3f}  " + " ".join(f"{ret[p]:8.3f}" for p in POLICIES))

    if a.out:
        with open(a.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, ["phase", "option_id", "success", "gap", "policy",
                                    "mean_return"], restval="")
            w.writeheader()
            w.writerows(log.rows)
            w.writerows(rows)


if __name__ == "__main__":
    main()
