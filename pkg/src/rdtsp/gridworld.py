"""Grid-world learning experiment: one tabular Q-learning option per reward.

Each option is trained to reach its own reward cell.  The Q target is
gamma * (1 on arrival, else max_a Q(s', a)), so a perfect option has
V_j(s) = gamma**d(s, j).  Local policies read those values as distances
d = log_gamma V and pick which option to run next.
"""

from __future__ import annotations

import math
import os
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .exact import held_karp, two_cluster_approx
from .instance import RdtspInstance
from .policies import Policy, make_policy, prune_components
from .reduction import DeterministicMdp, mdp_to_rdtsp
from .rng import derive_seed, make_rng

MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right
FIXTURE = "maze15.txt"


# -- maze ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Maze:
    walls: np.ndarray
    start: tuple
    rewards: tuple

    def __post_init__(self):
        w = np.asarray(self.walls, dtype=bool)
        w.setflags(write=False)
        object.__setattr__(self, "walls", w)
        object.__setattr__(self, "start", tuple(int(v) for v in self.start))
        object.__setattr__(self, "rewards", tuple(tuple(int(v) for v in r) for r in self.rewards))
        cells = [self.start, *self.rewards]
        if any(not self.is_free(*c) for c in cells):
            raise ValidationError("start and rewards must sit on free cells")
        if len(set(cells)) != len(cells):
            raise ValidationError("start and reward cells must be distinct")
        reach = bfs_distances(self, self.start)
        cut = [r for r in self.rewards if reach[self.state(*r)] < 0]
        if cut:
            raise ValidationError(f"rewards unreachable from the start: {cut}")

    @property
    def height(self) -> int:
        return self.walls.shape[0]

    @property
    def width(self) -> int:
        return self.walls.shape[1]

    @property
    def n(self) -> int:
        return len(self.rewards)

    @property
    def size(self) -> int:
        return self.walls.size

    def is_free(self, r, c) -> bool:
        return 0 <= r < self.height and 0 <= c < self.width and not self.walls[r, c]

    def free_cells(self):
        return [tuple(int(v) for v in rc) for rc in np.argwhere(~self.walls)]

    def state(self, r, c) -> int:
        return r * self.width + c

    def cell(self, s) -> tuple:
        return divmod(int(s), self.width)

    def transitions(self) -> list[list[int]]:
        """``nxt[s][a]``: deterministic successor; bumping a wall stays put."""
        nxt = []
        for s in range(self.size):
            r, c = self.cell(s)
            nxt.append([self.state(r + dr, c + dc) if self.is_free(r + dr, c + dc) else s
                        for dr, dc in MOVES])
        return nxt

    @classmethod
    def parse(cls, text: str) -> "Maze":
        """``#`` wall, ``.`` free, ``S`` start, ``R`` reward; rewards indexed in reading order."""
        lines = [ln.rstrip("\n") for ln in text.strip("\n").splitlines() if ln.strip()]
        if not lines or len({len(ln) for ln in lines}) != 1:
            raise ValidationError("maze rows must be non-empty and of equal length")
        walls = np.zeros((len(lines), len(lines[0])), dtype=bool)
        start, rewards = None, []
        for r, ln in enumerate(lines):
            for c, ch in enumerate(ln):
                if ch == "#":
                    walls[r, c] = True
                elif ch == "S":
                    if start is not None:
                        raise ValidationError("maze has more than one start")
                    start = (r, c)
                elif ch == "R":
                    rewards.append((r, c))
                elif ch != ".":
                    raise ValidationError(f"bad maze character {ch!r} at row {r}, col {c}")
        if start is None:
            raise ValidationError("maze has no start cell")
        return cls(walls, start, tuple(rewards))

    def to_text(self) -> str:
        rows = [["#" if w else "." for w in row] for row in self.walls]
        rows[self.start[0]][self.start[1]] = "S"
        for r, c in self.rewards:
            rows[r][c] = "R"
        return "\n".join("".join(row) for row in rows) + "\n"

    @classmethod
    def load(cls, path) -> "Maze":
        return cls.parse(Path(path).read_text())


def fixture_maze() -> Maze:
    """15x15 maze, 8 rewards: a lone reward near the start and a room of 7 further away."""
    return Maze.parse(resources.files("rdtsp").joinpath("data", FIXTURE).read_text())


def room_maze(size=50, room=8, n_rewards=45, clusters=9, seed=0) -> Maze:
    """Square grid of rooms joined by doorways, rewards clumped into random rooms."""
    rng = make_rng(seed)
    walls = np.zeros((size, size), dtype=bool)
    walls[0, :] = walls[-1, :] = walls[:, 0] = walls[:, -1] = True
    cuts = list(range(room + 1, size - 1, room + 1))
    for k in cuts:
        walls[k, :] = True
        walls[:, k] = True
    bounds = [0, *cuts, size - 1]
    for a, b in zip(bounds, bounds[1:]):
        for k in cuts:
            walls[k, int(rng.integers(a + 1, b))] = False
            walls[int(rng.integers(a + 1, b)), k] = False
    rooms = [(r0 + 1, r1, c0 + 1, c1) for r0, r1 in zip(bounds, bounds[1:])
             for c0, c1 in zip(bounds, bounds[1:])]
    start = ((rooms[0][0] + rooms[0][1]) // 2, (rooms[0][2] + rooms[0][3]) // 2)
    picked = rng.choice(len(rooms) - 1, size=min(clusters, len(rooms) - 1), replace=False) + 1
    sizes = np.bincount(rng.integers(len(picked), size=n_rewards), minlength=len(picked))
    rewards = []
    for k, cnt in zip(picked, sizes):
        r0, r1, c0, c1 = rooms[k]
        cells = [(r, c) for r in range(r0, r1) for c in range(c0, c1) if not walls[r, c]]
        take = rng.choice(len(cells), size=min(int(cnt), len(cells)), replace=False)
        rewards.extend(cells[i] for i in sorted(take))
    return Maze(walls, start, tuple(sorted(rewards)))


def bfs_distances(maze: Maze, source) -> np.ndarray:
    """Step counts from ``source`` to every cell; -1 for walls and unreachable cells."""
    dist = np.full(maze.size, -1, dtype=np.int64)
    s0 = maze.state(*source)
    dist[s0] = 0
    queue = deque([source])
    while queue:
        r, c = queue.popleft()
        here = dist[maze.state(r, c)]
        for dr, dc in MOVES:
            rr, cc = r + dr, c + dc
            if maze.is_free(rr, cc) and dist[maze.state(rr, cc)] < 0:
                dist[maze.state(rr, cc)] = here + 1
                queue.append((rr, cc))
    return dist


# -- options -------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    T: int = 150
    K: int = 500
    L: int = 30
    epsilon: float = 0.1
    lr: float = 0.1
    slip: float = 0.0
    gamma: float | None = None
    eval_trials: int = 100
    workers: int | None = None
    q_init: float = 1.0

    def __post_init__(self):
        for name in ("epsilon", "lr", "slip", "q_init"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.T < 1 or self.L < 1 or self.K < 0:
            raise ValidationError("T and L must be positive and K non-negative")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise ValidationError(f"gamma must lie in (0, 1), got {self.gamma}")

    def resolved_gamma(self, n: int) -> float:
        return self.gamma if self.gamma is not None else 1.0 - 1.0 / max(n, 2)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass(frozen=True, eq=False)
class OptionTable:
    """``q[j, s, a]`` for reward j; the row of a reward's own cell is pinned to 1."""

    q: np.ndarray
    gamma: float

    @property
    def values(self) -> np.ndarray:
        return self.q.max(axis=2)

    def greedy(self) -> np.ndarray:
        return self.q.argmax(axis=2)


@dataclass
class LearningLog:
    rows: list = field(default_factory=list)       # phase, option_id, success, gap
    snapshots: list = field(default_factory=list)  # q array after each phase
    seeds: list = field(default_factory=list)      # per-option training seeds

    def phase(self, k: int, gamma: float) -> OptionTable:
        return OptionTable(self.snapshots[k], gamma)


def _act(q, u, eps, explore):
    if explore < eps:
        return int(u * 4)
    m = max(q)
    ties = [a for a in range(4) if q[a] == m]
    return ties[int(u * len(ties))]


def _rollout(Q, nxt, goal, s, T, slip, rnd):
    """Greedy run (random tie-break).  Returns steps taken, or -1 if T ran out."""
    for t in range(T):
        u = rnd[t]
        a = _act(Q[s], u[0], 0.0, 1.0)
        if slip and u[1] < slip:
            a = int(u[2] * 4)
        s = nxt[s][a]
        if s == goal:
            return t + 1
    return -1


def _stats(Q, nxt, goal, starts, bfs, T, slip, trials, rng):
    hits, gaps = 0, []
    picks = rng.integers(len(starts), size=trials)
    for p in picks:
        s0 = starts[int(p)]
        steps = _rollout(Q, nxt, goal, s0, T, slip, rng.random((T, 3)).tolist())
        if steps >= 0:
            hits += 1
            gaps.append(steps - int(bfs[s0]))
    return hits / trials, (float(np.mean(gaps)) if gaps else float("nan"))


def _train_one(job):
    nxt, goal, starts, bfs, cfg, gamma, seed = job
    rng = make_rng(seed)
    Q = [[cfg["q_init"]] * 4 for _ in nxt]
    Q[goal] = [1.0] * 4
    T, eps, lr, slip = cfg["T"], cfg["epsilon"], cfg["lr"], cfg["slip"]
    snaps, stats = [], []
    for phase in range(cfg["L"]):
        for _ in range(cfg["K"]):
            s = starts[int(rng.integers(len(starts)))]
            rnd = rng.random((T, 4)).tolist()
            for t in range(T):
                u = rnd[t]
                q = Q[s]
                a = _act(q, u[1], eps, u[0])
                s2 = nxt[s][int(u[3] * 4) if slip and u[2] < slip else a]
                done = s2 == goal
                target = gamma if done else gamma * max(Q[s2])
                q[a] += lr * (target - q[a])
                s = s2
                if done:
                    break
        snaps.append(np.array(Q))
        stat_rng = make_rng(derive_seed(seed, "phase-stats", phase))
        stats.append(_stats(Q, nxt, goal, starts, bfs, T, slip, cfg["eval_trials"], stat_rng))
    return snaps, stats


def _workers(requested):
    if requested is not None:
        return max(1, int(requested))
    return max(1, int(os.environ.get("RDTSP_WORKERS", "1")))


def option_seeds(seed: int, n: int) -> list[int]:
    return [derive_seed("option", seed, j) for j in range(n)]


def train_options(maze: Maze, cfg: TrainConfig = TrainConfig(), seed: int = 0,
                  workers: int | None = None):
    """Train every option independently; returns ``(OptionTable, LearningLog)``.

    Option j uses its own seed (``option_seeds``), so running them in a
    process pool gives the same tables as running them one after another.
    """
    gamma = cfg.resolved_gamma(maze.n)
    nxt = maze.transitions()
    seeds = option_seeds(seed, maze.n)
    jobs = []
    for j, goal_cell in enumerate(maze.rewards):
        goal = maze.state(*goal_cell)
        starts = [maze.state(*c) for c in maze.free_cells() if c != goal_cell]
        jobs.append((nxt, goal, starts, bfs_distances(maze, goal_cell), asdict(cfg), gamma, seeds[j]))
    w = _workers(workers if workers is not None else cfg.workers)
    if w > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(w, len(jobs))) as pool:
            results = list(pool.map(_train_one, jobs))
    else:
        results = [_train_one(job) for job in jobs]
    log = LearningLog(seeds=seeds)
    for phase in range(cfg.L):
        log.snapshots.append(np.stack([res[0][phase] for res in results]))
        for j, res in enumerate(results):
            success, gap = res[1][phase]
            log.rows.append({"phase": phase, "option_id": j, "success": success, "gap": gap})
    if cfg.L == 0 or not log.snapshots:
        raise ValidationError("training produced no phases")
    return OptionTable(log.snapshots[-1], gamma), log


def untrained_options(maze: Maze, gamma: float) -> OptionTable:
    q = np.zeros((maze.n, maze.size, 4))
    for j, cell in enumerate(maze.rewards):
        q[j, maze.state(*cell)] = 1.0
    return OptionTable(q, gamma)


def oracle_options(maze: Maze, gamma: float) -> OptionTable:
    """Exact options from BFS: Q_j(s, a) = gamma**(1 + d_j(next(s, a)))."""
    nxt = np.asarray(maze.transitions())
    q = np.zeros((maze.n, maze.size, 4))
    for j, cell in enumerate(maze.rewards):
        d = bfs_distances(maze, cell).astype(float)
        v = np.where(d >= 0, gamma ** d, 0.0)
        q[j] = gamma * v[nxt]
        q[j, maze.state(*cell)] = 1.0
    return OptionTable(q, gamma)


@dataclass(frozen=True)
class OptionStats:
    success: float
    gap: float
    per_option: tuple
    seed: int


def option_stats(options: OptionTable, maze: Maze, slip: float = 0.0, trials: int = 100,
                 seed: int = 0, T: int = 150) -> OptionStats:
    """Greedy rollouts from uniform random free cells: success rate and mean time gap."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    nxt = maze.transitions()
    per = []
    for j, cell in enumerate(maze.rewards):
        goal = maze.state(*cell)
        starts = [maze.state(*c) for c in maze.free_cells() if c != cell]
        Q = options.q[j].tolist()
        rng = make_rng(derive_seed("option-stats", seed, j))
        per.append(_stats(Q, nxt, goal, starts, bfs_distances(maze, cell), T, slip, trials, rng))
    succ = float(np.mean([p[0] for p in per]))
    gaps = [p[1] for p in per if not math.isnan(p[1])]
    return OptionStats(succ, float(np.mean(gaps)) if gaps else float("nan"), tuple(per), seed)


# -- composition -----------------------------------------------------------------

class OptionView:
    """LocalView backed by option values at the agent's cell."""

    def __init__(self, values: np.ndarray, gamma: float):
        self._v = values
        self._lg = math.log(gamma)
        self.n = values.shape[0]
        self.gamma = gamma
        self.current = None
        self.cell = None
        self.collected = np.zeros(self.n, dtype=bool)

    def distances(self):
        v = np.maximum(self._v[:, self.cell], 1e-300)
        return np.where(self.collected, np.inf, np.log(v) / self._lg)

    def is_collected(self, i):
        return bool(self.collected[i])


class FixedOrder(Policy):
    """Follows a precomputed order, skipping anything already collected."""

    name = "OPT"

    def __init__(self, order, **params):
        super().__init__(**params)
        self.order = [int(i) for i in order]

    def choose(self, view):
        self.info = {"branch": "FIXED"}
        return next(i for i in self.order if not view.is_collected(i))


@dataclass
class CompositionResult:
    policy: str
    seed: int
    value: float
    order: list
    times: list
    truncated: bool


def reference_order(maze: Maze, gamma: float) -> list[int]:
    """OPT stand-in on the reduced instance: exact up to 18 rewards, two-cluster beyond."""
    inst = mdp_to_rdtsp(DeterministicMdp.from_maze(maze), gamma)
    if inst.n <= 18:
        return list(held_karp(inst).order)
    # rooms: rewards joined by chains of neighbouring cells
    labels = np.zeros(inst.n, dtype=np.int64)
    for c, comp in enumerate(prune_components(inst, 2.5)):
        labels[comp] = c
    inst = RdtspInstance(inst.gamma, inst.start_distances, inst.dist, cluster_labels=labels)
    return list(two_cluster_approx(inst).order)


def evaluate_composition(maze: Maze, options: OptionTable, policy_spec, slip: float = 0.0,
                         seed: int = 0, step_cap: int | None = None,
                         opt_order=None) -> CompositionResult:
    """Run a local policy over the options; return sum of gamma**t over collection times.

    ``policy_spec`` is a policy name, a LocalPolicySpec, a Policy, or ``"OPT"``
    (follow ``opt_order``, computed by :func:`reference_order` when omitted).
    The policy draws from ``make_rng(seed)`` exactly as ``run_policy`` does;
    slips and greedy ties use a separate derived stream.
    """
    gamma = options.gamma
    if isinstance(policy_spec, Policy):
        policy = policy_spec
    elif isinstance(policy_spec, str) and policy_spec.upper() == "OPT":
        policy = FixedOrder(opt_order if opt_order is not None else reference_order(maze, gamma))
    else:
        policy = make_policy(policy_spec)
    cap = step_cap or 10 * (maze.width + maze.height)
    nxt = maze.transitions()
    goal_of = {maze.state(*c): j for j, c in enumerate(maze.rewards)}
    view = OptionView(options.values, gamma)
    view.cell = maze.state(*maze.start)
    policy.reset(make_rng(seed), maze.n, gamma)
    world = make_rng(derive_seed("dynamics", seed))
    t, value, order, times, truncated = 0, 0.0, [], [], False
    while len(order) < maze.n and not truncated:
        j = policy.choose(view)
        goal = maze.state(*maze.rewards[j])
        Q = options.q[j]
        steps = 0
        while not view.collected[j]:
            if steps >= cap:
                truncated = True
                break
            q = Q[view.cell]
            best = np.flatnonzero(q == q.max())
            a = int(best[0] if best.size == 1 else best[world.integers(best.size)])
            if slip and world.random() < slip:
                a = int(world.integers(4))
            view.cell = nxt[view.cell][a]
            t += 1
            steps += 1
            k = goal_of.get(view.cell)
            if k is not None and not view.collected[k]:
                view.collected[k] = True
                value += gamma ** t
                order.append(k)
                times.append(t)
        if view.collected[j]:
            view.current = j
    return CompositionResult(policy.name, seed, value, order, times, truncated)


def evaluate_phases(maze: Maze, log: LearningLog, gamma: float, policies, seeds, slip=0.0,
                    phases=None) -> list[dict]:
    """Mean composite return per (phase, policy) over ``seeds``."""
    opt = reference_order(maze, gamma)
    rows = []
    for k in (range(len(log.snapshots)) if phases is None else phases):
        table = log.phase(k, gamma)
        for p in policies:
            vals = [evaluate_composition(maze, table, p, slip, s, opt_order=opt).value
                    for s in seeds]
            rows.append({"phase": k, "policy": p if isinstance(p, str) else p.name,
                         "mean_return": float(np.mean(vals))})
    return rows
