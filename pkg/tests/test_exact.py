import json

import numpy as np
import pytest

from rdtsp.errors import GuardError, ValidationError
from rdtsp.exact import (
    brute_force_opt, dstar_dp, held_karp, held_karp_forward, line_dp, two_cluster_approx,
)
from rdtsp.generators import (
    gen_line, gen_random_cities, gen_random_clusters, gen_star, gen_star_clique,
)
from rdtsp.instance import RdtspInstance, from_points, tour_value
from rdtsp.policies import run_policy

from oracles import brute_force


def line(positions, gamma):
    p = np.asarray(positions, dtype=float)
    return RdtspInstance(gamma, np.abs(p), np.abs(p[:, None] - p[None, :]))


def cities(n, seed, gamma=0.9):
    rng = np.random.default_rng(seed)
    return from_points(rng.uniform(0, 4, size=(n, 2)), gamma)


def test_brute_single_reward():
    inst = RdtspInstance(0.9, [3.0], [[0.0]])
    t = brute_force_opt(inst)
    assert t.order == (0,) and t.value == pytest.approx(0.9 ** 3, rel=1e-14)


def test_brute_lexicographic_tie():
    inst = RdtspInstance(0.5, [1.0, 1.0], [[0.0, 10.0], [10.0, 0.0]])
    t = brute_force_opt(inst)
    assert t.order == (0, 1)
    assert t.value == pytest.approx(0.5 + 0.5 ** 11, rel=1e-14)


def test_brute_guard():
    with pytest.raises(GuardError) as e:
        brute_force_opt(cities(11, 0))
    assert "10" in str(e.value)


@pytest.mark.parametrize("seed", range(5))
def test_brute_matches_itertools_oracle(seed):
    inst = cities(6, seed)
    want, _ = brute_force(inst.start_distances.tolist(), inst.dist.tolist(), inst.gamma)
    assert brute_force_opt(inst).value == pytest.approx(want, rel=1e-12)


def test_brute_equals_held_karp_n7():
    inst = gen_random_cities(7, seed=4)
    assert held_karp(inst).value == pytest.approx(brute_force_opt(inst).value, rel=1e-12)


def test_held_karp_single():
    inst = RdtspInstance(0.7, [2.0], [[0.0]])
    assert held_karp(inst).value == brute_force_opt(inst).value


def test_held_karp_sweep_200():
    rng = np.random.default_rng(123)
    for seed in range(200):
        n = int(rng.integers(2, 10))
        inst = cities(n, 1000 + seed, gamma=float(rng.uniform(0.3, 0.95)))
        hk = held_karp(inst)
        assert hk.value == pytest.approx(brute_force_opt(inst).value, rel=1e-12, abs=1e-14)
        assert tour_value(inst, hk.order) == pytest.approx(hk.value, rel=1e-12)


def test_held_karp_guard():
    with pytest.raises(GuardError):
        held_karp(cities(21, 0))


def test_forward_recursion_never_exceeds_opt():
    for seed in range(50):
        inst = cities(7, seed)
        fw = held_karp_forward(inst)
        assert fw.value <= held_karp(inst).value + 1e-12
        assert tour_value(inst, fw.order) == pytest.approx(fw.value, rel=1e-12)


def test_star_clique_sqrt_instance_value():
    inst = gen_star_clique(16, variant="stoch")
    assert inst.meta["params"]["clique_size"] == 4
    assert held_karp(inst).value >= 1.0


def test_line_examples():
    assert line_dp(line([1, 2], 0.5)).value == pytest.approx(0.75)
    t = line_dp(line([-1, 1], 0.5), positions=[-1, 1])
    assert t.value == pytest.approx(0.625)
    assert t.order == (0, 1)  # left first on ties
    assert line_dp(line([1, -1], 0.5), positions=[1, -1]).order == (1, 0)


def test_line_sweep_vs_brute():
    for seed in range(100):
        inst = gen_line(9, seed=seed)
        assert line_dp(inst).value == pytest.approx(brute_force_opt(inst).value, rel=1e-10)


def test_line_inferred_layout():
    for seed in range(20):
        inst = line(np.random.default_rng(seed).uniform(-3, 3, 6), 0.8)
        assert line_dp(inst).value == pytest.approx(brute_force_opt(inst).value, rel=1e-10)


def test_line_layout_mismatch():
    with pytest.raises(ValidationError):
        line_dp(line([1, 2], 0.5), positions=[1, 3])


def test_dstar_one_ray_is_line():
    inst = line([0.5, 1.5, 3.0], 0.8)
    assert dstar_dp(inst).value == pytest.approx(line_dp(inst).value, rel=1e-12)


def test_dstar_two_rays_is_line():
    for seed in range(50):
        inst = gen_line(7, seed=seed)
        p = np.asarray(inst.meta["layout"])
        rays = [sorted(np.nonzero(p < 0)[0], key=lambda i: -p[i]),
                sorted(np.nonzero(p >= 0)[0], key=lambda i: p[i])]
        rays = [r for r in rays if r]
        assert dstar_dp(inst, rays=rays).value == pytest.approx(line_dp(inst).value, rel=1e-10)


def test_dstar_three_rays_vs_brute():
    for seed in range(100):
        inst = gen_star(9, seed=seed, rays=3)
        assert dstar_dp(inst).value == pytest.approx(brute_force_opt(inst).value, rel=1e-10)


def test_dstar_guard():
    with pytest.raises(GuardError):
        dstar_dp(gen_star(10, seed=0, rays=5))


def test_two_cluster_single_cluster():
    inst = cities(5, 2)
    inst = RdtspInstance(inst.gamma, inst.start_distances, inst.dist, cluster_labels=[0] * 5)
    assert two_cluster_approx(inst).value == pytest.approx(held_karp(inst).value, rel=1e-12)


def test_two_cluster_far_pair_plus_tail():
    rng = np.random.default_rng(0)
    blobs = [(5, 0), (5, 1), (40, 40)]
    pts, labels = [], []
    for c, (cx, cy) in enumerate(blobs):
        for _ in range(3):
            pts.append((cx + rng.uniform(-0.2, 0.2), cy + rng.uniform(-0.2, 0.2)))
            labels.append(c)
    inst = from_points(np.array(pts), 0.9, cluster_labels=labels)
    t = two_cluster_approx(inst)
    core = [i for i, c in enumerate(labels) if c < 2]
    sub = RdtspInstance(0.9, inst.start_distances[core], inst.dist[np.ix_(core, core)])
    core_order = [core[i] for i in brute_force_opt(sub).order]
    assert list(t.order[:6]) == core_order
    assert t.meta["approximate"] is False


def test_two_cluster_needs_clusters():
    with pytest.raises(ValidationError):
        two_cluster_approx(cities(4, 0))


def test_two_cluster_threshold_components():
    inst = cities(8, 3)
    t = two_cluster_approx(inst, threshold=1.0)
    assert sorted(t.order) == list(range(8))


def test_held_karp_dominates_policies():
    for seed in range(20):
        inst = cities(8, seed)
        opt = held_karp(inst).value
        for pol in ("NN", "RNN", "NN_RDFS", "NN_RA", "RAND"):
            assert run_policy(inst, pol, seed).value <= opt + 1e-10


def test_solvers_deterministic():
    inst = gen_star(8, seed=5)
    for solver in (brute_force_opt, held_karp, dstar_dp):
        a, b = solver(inst), solver(inst)
        assert a.order == b.order and a.value == b.value
    d = held_karp(inst).to_dict()
    assert set(d) >= {"order", "value", "solver", "elapsed_ms"}
    json.dumps(d)


def test_two_cluster_dominates_policies_on_clusters():
    wins = 0
    for seed in range(100):
        inst = gen_random_clusters(100, seed=seed, k=10)
        ref = two_cluster_approx(inst).value
        best = max(run_policy(inst, p, seed).value
                   for p in ("NN", "RNN", "NN_RDFS", "NN_RA", "RAND"))
        wins += ref >= best - 1e-12
    assert wins >= 95
