"""Worst-case constructions: NN trap ratio and the star-with-clique instances.

    python3 scripts/adversarial.py --seeds 1000
"""

import argparse
import math

import numpy as np

from rdtsp.exact import held_karp
from rdtsp.generators import (
    default_gamma, gen_nn_trap, gen_star_clique, half_distance, star_clique_clique_first,
)
from rdtsp.instance import tour_value
from rdtsp.policies import nn_tour, run_policy

STOCH = ("RNN", "NN_RDFS", "NN_RA")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=1000)
    a = ap.parse_args()

    print("nn_trap: NN/OPT vs 2/n  (L = log2(n) * x)")
    for n in (4, 8, 12, 16):
        inst = gen_nn_trap(n, L=math.log2(n) * half_distance(default_gamma(n)))
        print(f"  n={n:3d} ratio={nn_tour(inst).value / held_karp(inst).value:.4f} 2/n={2 / n:.4f}")

    print("star_clique (clique n/2, gamma 1-1/n): NN/OPT vs 24/n, stochastic means")
    for n in (16, 64, 256):
        inst = gen_star_clique(n)
        opt = tour_value(inst, star_clique_clique_first(inst))
        nn = nn_tour(inst).value
        means = {p: np.mean([run_policy(inst, p, s).value for s in range(a.seeds)])
                 for p in STOCH}
        print(f"  n={n:3d} OPT={opt:8.3f} NN={nn:.3f} NN/OPT={nn / opt:.4f} 24/n={24 / n:.4f} "
              + " ".join(f"{p}={v:.3f}" for p, v in means.items()))

    print("star_clique stochastic variant (clique sqrt(n), gamma 1-1/sqrt(n)): OPT vs sqrt(n)/4")
    for n in (9, 16):
        inst = gen_star_clique(n, variant="stoch")
        print(f"  n={n:3d} OPT={held_karp(inst).value:.4f} bound={math.sqrt(n) / 4:.4f}")


if __name__ == "__main__":
    main()
