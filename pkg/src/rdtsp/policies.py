"""Local policies over options.

A local policy only sees a :class:`LocalView`: the node it stands on, what
it has collected so far, and the distance (equivalently the option value
gamma**d) from the current node to every uncollected reward.  Anything else
it uses must come from its own memory of earlier observations.

All stochastic policies start from the same draws in the same order (coin,
then the random first reward), so running two of them with one seed gives
common random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Protocol

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError
from .instance import RdtspInstance, Tour, discounted_sum
from .rng import RNG_NAME, make_rng

START = None


class LocalView(Protocol):
    n: int
    gamma: float
    current: int | None

    def distances(self) -> np.ndarray:
        """Distances from the current node; ``inf`` for collected rewards."""

    def is_collected(self, i: int) -> bool: ...


class InstanceView:
    """LocalView over an explicit RD-TSP instance."""

    def __init__(self, inst: RdtspInstance):
        self._inst = inst
        self.n = inst.n
        self.gamma = inst.gamma
        self.current = START
        self.collected = np.zeros(inst.n, dtype=bool)
        self.steps = 0
        # (node, number collected) at every read; what was seen follows from the trace
        self.reads: list[tuple[int | None, int]] = []

    def distances(self) -> np.ndarray:
        row = (self._inst.start_distances if self.current is START
               else self._inst.dist[self.current])
        self.reads.append((self.current, self.steps))
        return np.where(self.collected, np.inf, row)

    def is_collected(self, i):
        return bool(self.collected[i])

    def move(self, j):
        self.collected[j] = True
        self.current = int(j)
        self.steps += 1


@dataclass(frozen=True)
class LocalPolicySpec:
    kind: str
    seed: int = 0
    params: dict = field(default_factory=dict)


@dataclass
class PolicyOutcome:
    policy: str
    seed: int | None
    tour: Tour
    trace: list[dict]
    draws: dict = field(default_factory=dict)

    @property
    def order(self):
        return self.tour.order

    @property
    def value(self):
        return self.tour.value

    @property
    def legs(self) -> list[float]:
        return [step["leg"] for step in self.trace]

    def to_dict(self) -> dict:
        return {"policy": self.policy, "seed": self.seed, "rng": RNG_NAME,
                "order": list(self.tour.order), "value": self.tour.value,
                "draws": self.draws, "trace": self.trace}


def _nearest(view) -> int:
    # argmin returns the first minimum, i.e. the smallest index on ties
    return int(np.argmin(view.distances()))


class Policy:
    """Base class: ``reset`` once per episode, then ``choose`` at every decision."""

    name = "policy"

    def __init__(self, **params):
        self.params = params
        self.info: dict[str, Any] = {}
        self.via: list[int] = []
        self.draws: dict[str, Any] = {}

    def reset(self, rng: np.random.Generator, n: int, gamma: float):
        self.rng = rng
        self.draws = {}

    def choose(self, view: LocalView) -> int:
        raise NotImplementedError


class NearestNeighbor(Policy):
    name = "NN"

    def choose(self, view):
        self.info = {"branch": "NN"}
        return _nearest(view)


class _CoinPolicy(Policy):
    """Fair coin; on heads collect a uniformly random reward first."""

    def reset(self, rng, n, gamma):
        super().reset(rng, n, gamma)
        forced = self.params.get("coin")
        heads = rng.random() < 0.5
        if forced is not None:
            heads = forced == "heads"
        self.heads = heads
        self.s1 = None
        if heads:
            s1 = int(rng.integers(n))
            self.s1 = int(self.params.get("s1", s1))
        self.picked = False
        self.draws = {"coin": "heads" if heads else "tails", "s1": self.s1}

    def first_pick(self, view):
        if self.heads and not self.picked:
            self.picked = True
            if not view.is_collected(self.s1):
                self.info = {"branch": "RANDOM", "coin": "heads"}
                return self.s1
        return None


class RandomNN(_CoinPolicy):
    name = "RNN"

    def choose(self, view):
        j = self.first_pick(view)
        if j is not None:
            return j
        self.info = {"branch": "NN"}
        return _nearest(view)


def theta_support(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


class NNRandomDFS(_CoinPolicy):
    """NN with probability 1/2, otherwise random start then DFS on edges shorter than theta.

    DFS expands the shortest admissible edge first (ties to the smaller
    index) and hands over to NN once the pruned component of the random
    start is exhausted.  With ``walk_backtracks=True`` every move to the
    next DFS target walks back up the tree first and pays for it.
    """

    name = "NN_RDFS"

    def reset(self, rng, n, gamma):
        super().reset(rng, n, gamma)
        self.theta = self.n_prime = self.i = None
        if self.heads:
            m = theta_support(n)
            i = int(rng.integers(1, m + 1))
            self.i = int(self.params.get("i", i))
            self.n_prime = max(1.0, n / 2 ** self.i)
            x = math.log(2.0) / -math.log(gamma)
            self.theta = float(self.params.get("theta", x / math.sqrt(self.n_prime)))
        self.draws.update(i=self.i, n_prime=self.n_prime, theta=self.theta)
        self.stack: list[int] = []
        self.nbrs: dict[int, list[tuple[float, int]]] = {}
        self.parent: dict[int, int] = {}
        self.dfs_done = not self.heads

    def _tag(self, branch):
        self.info = {"branch": branch, "theta": self.theta, "n_prime": self.n_prime, "i": self.i}

    def choose(self, view):
        self.via = []
        j = self.first_pick(view)
        if j is not None:
            self._tag("RANDOM")
            return j
        if not self.dfs_done:
            u = view.current
            if u is not START and u not in self.nbrs:
                d = view.distances()
                close = np.nonzero(d < self.theta)[0]
                self.nbrs[u] = sorted(((float(d[k]), int(k)) for k in close), reverse=True)
                self.stack.append(u)
            popped = []
            while self.stack:
                top = self.stack[-1]
                pending = self.nbrs[top]
                while pending and view.is_collected(pending[-1][1]):
                    pending.pop()
                if pending:
                    k = pending.pop()[1]
                    self.parent[k] = top
                    if popped and self.params.get("walk_backtracks"):
                        # walk back up the tree: current -> ... -> top -> k
                        self.via = popped[1:] + [top]
                    self._tag("RDFS")
                    return k
                popped.append(self.stack.pop())
            self.dfs_done = True
        self._tag("NN")
        return _nearest(view)


class NNRandomAscent(_CoinPolicy):
    """NN with probability 1/2, otherwise random start then rewards by distance from it."""

    name = "NN_RA"

    def reset(self, rng, n, gamma):
        super().reset(rng, n, gamma)
        self.queue = None

    def choose(self, view):
        j = self.first_pick(view)
        if j is not None:
            return j
        if not self.heads:
            self.info = {"branch": "NN"}
            return _nearest(view)
        if self.queue is None:
            d = view.distances()
            free = np.nonzero(np.isfinite(d))[0]
            self.queue = free[np.lexsort((free, d[free]))].tolist()[::-1]
        while view.is_collected(self.queue[-1]):
            self.queue.pop()
        self.info = {"branch": "RA"}
        return self.queue.pop()


class UniformRandom(Policy):
    name = "RAND"

    def choose(self, view):
        free = np.nonzero(np.isfinite(view.distances()))[0]
        self.info = {"branch": "RAND"}
        return int(free[self.rng.integers(free.size)])


POLICIES = {
    "NN": NearestNeighbor,
    "RNN": RandomNN,
    "NN_RDFS": NNRandomDFS,
    "NN_RA": NNRandomAscent,
    "RAND": UniformRandom,
}
STOCHASTIC = ("RNN", "NN_RDFS", "NN_RA")


def policy_kind(name: str) -> str:
    key = name.upper().replace("-", "_")
    key = {"R_NN": "RNN", "RDFS": "NN_RDFS", "RA": "NN_RA", "RANDOM": "RAND"}.get(key, key)
    if key not in POLICIES:
        raise ValidationError(f"unknown policy {name!r}; known: {sorted(POLICIES)}")
    return key


def make_policy(spec: LocalPolicySpec | str, **params) -> Policy:
    if isinstance(spec, str):
        spec = LocalPolicySpec(spec, params=params)
    return POLICIES[policy_kind(spec.kind)](**{**spec.params, **params})


def run_policy(inst: RdtspInstance, policy: Policy | str, seed: int = 0,
               max_steps: int | None = None, **params) -> PolicyOutcome:
    """Roll a local policy out on an instance; ``max_steps`` truncates to a prefix."""
    if isinstance(policy, str):
        policy = make_policy(policy, **params)
    view = InstanceView(inst)
    policy.reset(make_rng(seed), inst.n, inst.gamma)
    steps = inst.n if max_steps is None else min(max_steps, inst.n)
    trace, order = [], []
    for _ in range(steps):
        here = view.current
        j = policy.choose(view)
        if view.is_collected(j):
            raise RuntimeError(f"{policy.name} chose collected reward {j}")
        path = [here, *policy.via, j]
        leg = sum(_d(inst, a, b) for a, b in zip(path, path[1:]))
        step = {"node": here, "choice": int(j), "leg": float(leg), **policy.info}
        if policy.via:
            step["via"] = list(policy.via)
        trace.append(step)
        order.append(int(j))
        view.move(j)
    value = discounted_sum([s["leg"] for s in trace], inst.gamma)
    return PolicyOutcome(policy.name, seed, Tour(tuple(order), value, policy.name), trace,
                         dict(policy.draws))


def _d(inst, a, b):
    return float(inst.start_distances[b] if a is START else inst.dist[a, b])


def replay_value(inst: RdtspInstance, outcome: PolicyOutcome) -> float:
    """Recompute an outcome's value from its trace and the instance alone."""
    legs = []
    for s in outcome.trace:
        path = [s["node"], *s.get("via", []), s["choice"]]
        legs.append(sum(_d(inst, a, b) for a, b in zip(path, path[1:])))
    return discounted_sum(legs, inst.gamma)


def nn_tour(inst: RdtspInstance) -> PolicyOutcome:
    return run_policy(inst, "NN", seed=0)


def rnn_tour(inst: RdtspInstance, seed: int, **params) -> PolicyOutcome:
    return run_policy(inst, "RNN", seed, **params)


def nn_rdfs_tour(inst: RdtspInstance, seed: int, **params) -> PolicyOutcome:
    return run_policy(inst, "NN_RDFS", seed, **params)


def nn_ra_tour(inst: RdtspInstance, seed: int, **params) -> PolicyOutcome:
    return run_policy(inst, "NN_RA", seed, **params)


def random_tour(inst: RdtspInstance, seed: int) -> PolicyOutcome:
    return run_policy(inst, "RAND", seed)


def nn_complete(inst: RdtspInstance, prefix) -> list[int]:
    """Extend ``prefix`` greedily by nearest uncollected reward."""
    order = [int(i) for i in prefix]
    taken = np.zeros(inst.n, dtype=bool)
    taken[order] = True
    row = inst.dist[order[-1]] if order else inst.start_distances
    while len(order) < inst.n:
        k = int(np.argmin(np.where(taken, np.inf, row)))
        order.append(k)
        taken[k] = True
        row = inst.dist[k]
    return order


def prune_components(inst: RdtspInstance, theta: float) -> list[list[int]]:
    """Connected components of the reward graph restricted to edges shorter than theta."""
    if not theta > 0:
        raise ValidationError(f"theta must be positive, got {theta}")
    adj = (inst.dist < theta) & ~np.eye(inst.n, dtype=bool)
    _, labels = connected_components(csr_matrix(adj), directed=False)
    groups: dict[int, list[int]] = {}
    for i, c in enumerate(labels):
        groups.setdefault(int(c), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])
