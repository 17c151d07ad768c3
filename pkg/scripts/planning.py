"""Planning benchmark sweep over the five synthetic families.

    python3 scripts/planning.py --ns 100 400 --out runs/planning

Writes report.csv, summary.json and mean/worst/ratio SVGs under --out and
prints a per-cell table.  Defaults follow the benchmark protocol (all five
families, n in 100..1000, 10 instances, 100 runs per stochastic policy).
"""

import argparse
import json
from pathlib import Path

from rdtsp.bench import DEFAULT_NS, BenchConfig, emit_csv, emit_svg, run_bench
from rdtsp.generators import PLANNING_FAMILIES


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--families", nargs="+", default=list(PLANNING_FAMILIES))
    ap.add_argument("--ns", nargs="+", type=int, default=list(DEFAULT_NS))
    ap.add_argument("--n-mdp", type=int, default=10)
    ap.add_argument("--n-alg", type=int, default=100)
    ap.add_argument("--reference", default="auto")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", default="runs/planning")
    a = ap.parse_args()

    cfg = BenchConfig(families=tuple(a.families), ns=tuple(a.ns), n_mdp=a.n_mdp,
                      n_alg=a.n_alg, reference=a.reference, master_seed=a.seed,
                      workers=a.workers)
    report = run_bench(cfg)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_csv(report, out / "report.csv")
    for metric in ("mean", "worst", "ratio"):
        emit_svg(report, metric, out / f"{metric}.svg")

    cells = []
    print(f"{'family':16s} {'n':>5s} {'policy':8s} {'mean':>9s} {'worst':>9s} {'ratio':>7s}")
    for (fam, n, pol), c in sorted(report.summary().items()):
        print(f"{fam:16s} {n:5d} {pol:8s} {c.mean:9.3f} {c.worst:9.3f} {c.mean_ratio:7.3f}")
        cells.append({"family": fam, "n": n, "policy": pol, "mean": c.mean,
                      "worst": c.worst, "mean_ratio": c.mean_ratio})
    (out / "summary.json").write_text(json.dumps({"meta": report.meta, "cells": cells}, indent=1))


if __name__ == "__main__":
    main()
