import numpy as np
import pytest

from rdtsp.errors import ValidationError
from rdtsp.exact import brute_force_opt, held_karp, line_dp
from rdtsp.gridworld import fixture_maze
from rdtsp.instance import validate_instance
from rdtsp.policies import run_policy
from rdtsp.reduction import DeterministicMdp, mdp_to_rdtsp, shortest_path_matrix

from oracles import floyd, grid_bfs


def path_mdp():
    return DeterministicMdp({"a": [("b", 1)], "b": [("a", 1), ("c", 1)], "c": [("b", 1)]},
                            "a", ("b", "c"))


def test_path_graph():
    sd, d = shortest_path_matrix(path_mdp())
    assert sd.tolist() == [1.0, 2.0]
    assert d[0, 1] == 1.0


def test_four_cycle():
    adj = {0: [(1, 1), (3, 1)], 1: [(2, 1)], 2: [(3, 1)]}
    sd, d = shortest_path_matrix(DeterministicMdp(adj, 0, (1, 3)))
    assert d[0, 1] == 2.0 and sd.tolist() == [1.0, 1.0]


def test_weighted_graph_matches_floyd():
    rng = np.random.default_rng(0)
    edges = [(i, i + 1, float(rng.uniform(0.5, 3))) for i in range(9)]
    edges += [(int(a), int(b), float(rng.uniform(0.5, 3)))
              for a, b in rng.integers(0, 10, size=(12, 2)) if a != b]
    adj = {}
    for a, b, w in edges:
        adj.setdefault(a, []).append((b, w))
    mdp = DeterministicMdp(adj, 0, (3, 5, 9))
    sd, d = shortest_path_matrix(mdp)
    full = floyd(10, edges)
    nodes = [3, 5, 9]
    assert np.allclose(sd, [full[0][k] for k in nodes])
    assert np.allclose(d, [[full[a][b] for b in nodes] for a in nodes])


def test_unreachable_reward_named():
    adj = {"s": [("a", 1)], "z": []}
    with pytest.raises(ValidationError, match="'z'"):
        shortest_path_matrix(DeterministicMdp(adj, "s", ("a", "z")))


def test_bad_weights_rejected():
    with pytest.raises(ValidationError):
        DeterministicMdp({0: [(1, 0.0)]}, 0, (1,))


def test_maze_matches_bfs_oracle():
    maze = fixture_maze()
    inst = mdp_to_rdtsp(DeterministicMdp.from_maze(maze), 0.9)
    rows = maze.to_text().splitlines()
    cells = [maze.start, *maze.rewards]
    for a, src in enumerate(cells):
        bfs = grid_bfs(rows, src)
        for b, dst in enumerate(cells[1:]):
            want = bfs[dst]
            got = inst.start_distances[b] if a == 0 else inst.dist[a - 1, b]
            assert got == want
    assert validate_instance(inst) == []
    assert np.all(inst.dist <= inst.start_distances[:, None] + inst.start_distances[None, :])


def test_single_reward_at_five():
    adj = {k: [(k + 1, 1)] for k in range(5)}
    inst = mdp_to_rdtsp(DeterministicMdp(adj, 0, (5,)), 0.9)
    for solver in (brute_force_opt, held_karp, line_dp):
        assert solver(inst).value == pytest.approx(0.9 ** 5, rel=1e-14)
    for p in ("NN", "RNN", "NN_RDFS", "NN_RA", "RAND"):
        assert run_policy(inst, p, 1).value == pytest.approx(0.9 ** 5, rel=1e-14)


def test_line_maze_opt():
    inst = mdp_to_rdtsp(path_mdp(), 0.5)
    assert brute_force_opt(inst).value == pytest.approx(0.75)


def test_meta_hash_and_json(tmp_path):
    mdp = path_mdp()
    inst = mdp_to_rdtsp(mdp, 0.5)
    assert inst.meta["params"]["mdp_sha256"] == mdp.digest()
    back = DeterministicMdp.load(mdp.save(tmp_path / "m.json"))
    assert back.digest() == mdp.digest()


def test_gamma_checked():
    with pytest.raises(ValidationError):
        mdp_to_rdtsp(path_mdp(), 1.0)
