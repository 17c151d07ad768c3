"""Deterministic collectible-reward MDPs and their RD-TSP instances.

In a deterministic MDP the value of the option that collects reward j,
seen from state i, is gamma**d(i, j) with d the shortest-path length, so
the instance is just the shortest-path metric over {start} + rewards.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import ValidationError
from .instance import RdtspInstance


@dataclass(frozen=True)
class DeterministicMdp:
    """Undirected state graph.  ``adjacency`` maps a state id to ``[(neighbour, weight), ...]``."""

    adjacency: dict
    start: object
    rewards: tuple
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        adj = {s: [(t, float(w)) for t, w in nbrs] for s, nbrs in self.adjacency.items()}
        for s, nbrs in list(adj.items()):
            for t, w in nbrs:
                if not w > 0:
                    raise ValidationError(f"edge {s!r}-{t!r} has non-positive weight {w}")
                adj.setdefault(t, [])
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "rewards", tuple(self.rewards))
        if self.start not in adj:
            raise ValidationError(f"start state {self.start!r} is not in the graph")
        if len(set(self.rewards)) != len(self.rewards):
            raise ValidationError("reward states must be distinct")
        if self.start in self.rewards:
            raise ValidationError("the start state cannot hold a reward")
        missing = [r for r in self.rewards if r not in adj]
        if missing:
            raise ValidationError(f"reward states not in the graph: {missing}")

    @property
    def states(self) -> list:
        return list(self.adjacency)

    @property
    def unit_weights(self) -> bool:
        return all(w == 1.0 for nbrs in self.adjacency.values() for _, w in nbrs)

    def sparse(self):
        index = {s: k for k, s in enumerate(self.adjacency)}
        # csr_matrix sums duplicate entries, so keep the lightest parallel edge by hand
        best = {}
        for s, nbrs in self.adjacency.items():
            for t, w in nbrs:
                for key in ((index[s], index[t]), (index[t], index[s])):
                    best[key] = min(w, best.get(key, np.inf))
        m = len(index)
        if not best:
            return csr_matrix((m, m)), index
        rows, cols = zip(*best)
        return csr_matrix((list(best.values()), (rows, cols)), shape=(m, m)), index

    def to_dict(self) -> dict:
        return {"adjacency": {str(s): [[t, w] for t, w in nbrs] for s, nbrs in self.adjacency.items()},
                "start": self.start, "rewards": list(self.rewards)}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "DeterministicMdp":
        ids = {str(r): r for r in [d["start"], *d["rewards"]]}
        for nbrs in d["adjacency"].values():
            ids.update({str(t): t for t, _ in nbrs})
        adj = {ids.get(s, s): [(t, w) for t, w in nbrs] for s, nbrs in d["adjacency"].items()}
        return cls(adj, d["start"], tuple(d["rewards"]))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict()))
        return path

    @classmethod
    def load(cls, path) -> "DeterministicMdp":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def from_maze(cls, maze) -> "DeterministicMdp":
        """Unit-cost 4-neighbour graph of a maze's free cells (states are (row, col))."""
        adj = {}
        for r, c in maze.free_cells():
            adj[(r, c)] = [((r + dr, c + dc), 1.0) for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))
                           if maze.is_free(r + dr, c + dc)]
        return cls(adj, tuple(maze.start), tuple(tuple(x) for x in maze.rewards))


def shortest_path_matrix(mdp: DeterministicMdp):
    """Shortest-path lengths among {start} + rewards: ``(start_distances, dist)``."""
    g, index = mdp.sparse()
    nodes = [mdp.start, *mdp.rewards]
    rows = shortest_path(g, method="D", directed=False, unweighted=mdp.unit_weights,
                         indices=[index[s] for s in nodes])
    sub = rows[:, [index[s] for s in nodes]]
    for k, s in enumerate(mdp.rewards, start=1):
        if not np.isfinite(sub[0, k]):
            raise ValidationError(f"reward state {s!r} is unreachable from the start")
    sub = np.minimum(sub, sub.T)
    return sub[0, 1:].copy(), sub[1:, 1:].copy()


def mdp_to_rdtsp(mdp: DeterministicMdp, gamma: float, **meta) -> RdtspInstance:
    if not 0.0 < gamma < 1.0:
        raise ValidationError(f"gamma must lie in (0, 1), got {gamma}")
    sd, dist = shortest_path_matrix(mdp)
    m = {"generator": "mdp", "params": {"mdp_sha256": mdp.digest()}, "seed": None,
         "states": [mdp.start, *mdp.rewards], **meta}
    return RdtspInstance(float(gamma), sd, dist, meta=m)
