import numpy as np
import pytest

from rdtsp.errors import ValidationError
from rdtsp.gridworld import (
    Maze, TrainConfig, bfs_distances, evaluate_composition, fixture_maze, option_stats,
    oracle_options, room_maze, train_options, untrained_options,
)
from rdtsp.policies import nn_tour
from rdtsp.reduction import DeterministicMdp, mdp_to_rdtsp

from oracles import grid_bfs

EMPTY5 = """
#######
#S....#
#.....#
#.....#
#.....#
#....R#
#######
"""


def test_parse_round_trip():
    m = fixture_maze()
    assert (m.height, m.width, m.n) == (15, 15, 8)
    assert Maze.parse(m.to_text()).to_text() == m.to_text()


@pytest.mark.parametrize("text", ["", "#S#\n#x#", "#..\n#R#", "S.\nR"])
def test_parse_errors(text):
    with pytest.raises(ValidationError):
        Maze.parse(text)


def test_unreachable_reward():
    with pytest.raises(ValidationError, match="unreachable"):
        Maze.parse("S#R")


def test_bfs_matches_oracle():
    m = fixture_maze()
    ref = grid_bfs(m.to_text().splitlines(), m.start)
    got = bfs_distances(m, m.start)
    for cell, d in ref.items():
        assert got[m.state(*cell)] == d


def test_room_maze_full_scale_shape():
    m = room_maze(seed=1)
    assert (m.height, m.width) == (50, 50) and m.n == 45


def test_empty_maze_learns_shortest_paths():
    m = Maze.parse(EMPTY5)
    opts, _ = train_options(m, TrainConfig(K=5000, L=1, gamma=0.9), seed=3)
    nxt = np.asarray(m.transitions())
    d = bfs_distances(m, m.rewards[0])
    greedy = opts.greedy()[0]
    for cell in m.free_cells():
        s = m.state(*cell)
        if d[s] > 0:
            assert d[nxt[s, greedy[s]]] == d[s] - 1, cell


def test_zero_epochs_is_uniform():
    m = Maze.parse(EMPTY5)
    opts, log = train_options(m, TrainConfig(K=0, L=1), seed=0)
    free = [m.state(*c) for c in m.free_cells() if c != m.rewards[0]]
    assert np.all(opts.q[0, free] == opts.q[0, free[0], 0])
    assert 0.0 <= log.rows[0]["success"] <= 1.0


def test_values_in_unit_interval():
    m = fixture_maze()
    opts, _ = train_options(m, TrainConfig(K=30, L=2), seed=1)
    v = opts.values
    assert v.min() >= 0.0 and v.max() <= 1.0


def test_parallel_equals_sequential():
    m = fixture_maze()
    cfg = TrainConfig(K=40, L=2)
    a, la = train_options(m, cfg, seed=5, workers=1)
    b, lb = train_options(m, cfg, seed=5, workers=2)
    assert np.array_equal(a.q, b.q)
    assert repr(la.rows) == repr(lb.rows)  # gap may be nan


def test_training_reproducible():
    m = fixture_maze()
    cfg = TrainConfig(K=20, L=1, slip=0.1)
    assert np.array_equal(train_options(m, cfg, 2)[0].q, train_options(m, cfg, 2)[0].q)


def test_option_values_round_trip():
    m = fixture_maze()
    g = 1 - 1 / m.n
    opts = oracle_options(m, g)
    inst = mdp_to_rdtsp(DeterministicMdp.from_maze(m), g)
    nxt = m.transitions()
    cells = [m.start, *m.rewards]
    for a, src in enumerate(cells):
        for j, goal in enumerate(m.rewards):
            if src == goal:
                continue
            s, t = m.state(*src), 0
            while s != m.state(*goal):
                s = nxt[s][int(opts.q[j, s].argmax())]
                t += 1
            d = inst.start_distances[j] if a == 0 else inst.dist[a - 1, j]
            assert g ** d == pytest.approx(g ** t, rel=1e-12)
            assert opts.values[j, m.state(*src)] == pytest.approx(g ** d, rel=1e-12)


def test_stats_oracle_deterministic():
    m = fixture_maze()
    st = option_stats(oracle_options(m, 0.875), m, slip=0.0, trials=50, seed=0)
    assert st.success == 1.0 and st.gap == 0.0


def test_stats_pure_random_walk():
    m = Maze.parse("#####\n#S..#\n#...#\n#..R#\n#####")
    st = option_stats(oracle_options(m, 0.9), m, slip=1.0, trials=300, seed=0, T=10)
    assert st.success < 1.0 and st.gap > 0.0


def test_stats_rejects_no_trials():
    m = Maze.parse(EMPTY5)
    with pytest.raises(ValidationError):
        option_stats(oracle_options(m, 0.9), m, trials=0)


def test_composition_nn_matches_reduction():
    m = fixture_maze()
    g = 1 - 1 / m.n
    res = evaluate_composition(m, oracle_options(m, g), "NN", 0.0, seed=0)
    inst = mdp_to_rdtsp(DeterministicMdp.from_maze(m), g)
    out = nn_tour(inst)
    assert res.value == pytest.approx(out.value, rel=1e-9, abs=1e-12)
    assert tuple(res.order) == out.order and not res.truncated


def test_single_reward_all_policies_equal():
    m = Maze.parse(EMPTY5)
    opts = oracle_options(m, 0.9)
    vals = {evaluate_composition(m, opts, p, 0.0, seed=4).value
            for p in ("NN", "RNN", "NN_RDFS", "NN_RA", "RAND", "OPT")}
    assert vals == {0.9 ** 8}


def test_return_bounded_and_truncation_flagged():
    m = fixture_maze()
    opts = untrained_options(m, 0.875)
    res = evaluate_composition(m, opts, "RAND", 0.0, seed=1, step_cap=5)
    assert res.truncated
    assert 0.0 <= res.value <= m.n
    for seed in range(5):
        r = evaluate_composition(m, oracle_options(m, 0.875), "RAND", 0.1, seed=seed)
        assert 0.0 <= r.value <= m.n


def test_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(epsilon=1.5)
    with pytest.raises(ValidationError):
        TrainConfig(T=0)
