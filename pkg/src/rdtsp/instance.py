"""RD-TSP instances and discounted tour evaluation.

An instance is a complete metric over a start node and ``n`` reward nodes.
Visiting order ``i_1, ..., i_m`` earns

    sum_j gamma ** (d(start, i_1) + d(i_1, i_2) + ... + d(i_{j-1}, i_j))

so the first reward is already discounted by its distance from the start.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ValidationError

TRIANGLE_TOL = 1e-9


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RdtspInstance:
    gamma: float
    start_distances: np.ndarray
    dist: np.ndarray
    coords: np.ndarray | None = None
    cluster_labels: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        sd = _frozen(self.start_distances)
        d = _frozen(self.dist)
        if sd.ndim != 1:
            raise ValidationError("start_distances must be a vector")
        n = sd.shape[0]
        if d.shape != (n, n):
            raise ValidationError(f"dist must be {n}x{n}, got {d.shape}")
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "start_distances", sd)
        object.__setattr__(self, "dist", d)
        if self.coords is not None:
            c = _frozen(self.coords)
            if c.shape != (n, 2):
                raise ValidationError(f"coords must be {n}x2, got {c.shape}")
            object.__setattr__(self, "coords", c)
        if self.cluster_labels is not None:
            lab = _frozen(self.cluster_labels, dtype=np.int64)
            if lab.shape != (n,):
                raise ValidationError(f"cluster_labels must have length {n}")
            object.__setattr__(self, "cluster_labels", lab)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n(self) -> int:
        return int(self.start_distances.shape[0])

    @property
    def half_distance(self) -> float:
        """Distance over which the discount halves, log_{1/gamma}(2)."""
        return math.log(2.0) / -math.log(self.gamma)

    def full_matrix(self) -> np.ndarray:
        """(n+1)x(n+1) metric with the start as node 0."""
        m = np.zeros((self.n + 1, self.n + 1))
        m[0, 1:] = self.start_distances
        m[1:, 0] = self.start_distances
        m[1:, 1:] = self.dist
        return m

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "n": self.n,
            "gamma": self.gamma,
            "start_distances": self.start_distances.tolist(),
            "dist": self.dist.tolist(),
        }
        if self.coords is not None:
            out["coords"] = self.coords.tolist()
        if self.cluster_labels is not None:
            out["cluster_labels"] = self.cluster_labels.tolist()
        meta = {"generator": None, "params": {}, "seed": None}
        meta.update(self.meta)
        out["meta"] = meta
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RdtspInstance":
        try:
            inst = cls(
                gamma=data["gamma"],
                start_distances=data["start_distances"],
                dist=data["dist"],
                coords=data.get("coords"),
                cluster_labels=data.get("cluster_labels"),
                meta=data.get("meta", {}),
            )
        except KeyError as e:
            raise ValidationError(f"instance JSON missing field {e.args[0]!r}") from None
        except (TypeError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"malformed instance JSON: {e}") from None
        if "n" in data and int(data["n"]) != inst.n:
            raise ValidationError(f"n={data['n']} disagrees with start_distances length {inst.n}")
        return inst

    def to_json(self) -> str:
        # repr-based float output round-trips exactly (17 significant digits max)
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n")
        return path

    @classmethod
    def load(cls, path) -> "RdtspInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Tour:
    order: tuple[int, ...]
    value: float
    solver: str = ""
    elapsed_ms: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {"order": list(self.order), "value": self.value,
                "solver": self.solver, "elapsed_ms": self.elapsed_ms}


@dataclass(frozen=True)
class Violation:
    field: str
    indices: tuple
    magnitude: float
    message: str


def check_order(n: int, order: Sequence[int]) -> list[int]:
    order = [int(i) for i in order]
    seen = set()
    for i in order:
        if not 0 <= i < n:
            raise ValidationError(f"index {i} out of range for n={n}")
        if i in seen:
            raise ValidationError(f"duplicate index {i} in order")
        seen.add(i)
    return order


def discounted_sum(legs, gamma: float) -> float:
    """Sum of gamma ** (running total of legs)."""
    legs = np.asarray(legs, dtype=np.float64)
    if legs.size == 0:
        return 0.0
    cum = np.cumsum(legs)
    return float(np.exp(cum * math.log(gamma)).sum())


def tour_legs(inst: RdtspInstance, order: Sequence[int]) -> np.ndarray:
    order = np.asarray(order, dtype=np.int64)
    if order.size == 0:
        return np.zeros(0)
    legs = np.empty(order.size)
    legs[0] = inst.start_distances[order[0]]
    legs[1:] = inst.dist[order[:-1], order[1:]]
    return legs


def tour_value(inst: RdtspInstance, order: Sequence[int]) -> float:
    order = check_order(inst.n, order)
    return discounted_sum(tour_legs(inst, order), inst.gamma)


def make_tour(inst: RdtspInstance, order, solver="", elapsed_ms=0.0, **meta) -> Tour:
    order = tuple(check_order(inst.n, order))
    return Tour(order, tour_value(inst, order), solver, elapsed_ms, meta)


def validate_instance(inst: RdtspInstance, max_records: int = 100) -> list[Violation]:
    out: list[Violation] = []
    g = inst.gamma
    if not (math.isfinite(g) and 0.0 < g < 1.0):
        out.append(Violation("gamma", (), g, f"gamma={g} outside (0, 1)"))

    m = inst.full_matrix()
    bad = ~np.isfinite(m)
    for i, j in zip(*np.nonzero(bad)):
        out.append(Violation(_field(i, j), _idx(i, j), float(m[i, j]), "non-finite distance"))
    if bad.any():
        return out[:max_records]
    for i, j in zip(*np.nonzero(m < 0)):
        out.append(Violation(_field(i, j), _idx(i, j), float(-m[i, j]), "negative distance"))
    diag = np.diag(inst.dist)
    for i in np.nonzero(diag != 0)[0]:
        out.append(Violation("dist", (int(i), int(i)), float(abs(diag[i])), "nonzero diagonal"))
    asym = np.abs(inst.dist - inst.dist.T)
    for i, j in zip(*np.nonzero(np.triu(asym > 0))):
        out.append(Violation("dist", (int(i), int(j)), float(asym[i, j]), "asymmetric entry"))

    # min over intermediates, one pass per intermediate node keeps memory at O(n^2)
    worst = np.zeros_like(m)
    via = np.full(m.shape, -1, dtype=np.int64)
    for k in range(m.shape[0]):
        through = m[:, k][:, None] + m[k, :][None, :]
        excess = m - through - TRIANGLE_TOL * (1.0 + through)
        better = excess > worst
        worst[better] = excess[better]
        via[better] = k
    hits = np.argwhere(np.triu(worst > 0, 1))
    if len(hits):
        mags = worst[hits[:, 0], hits[:, 1]]
        for h in np.argsort(-mags, kind="stable")[:max_records]:
            i, j = hits[h]
            k = via[i, j]
            out.append(Violation(
                "triangle", (_node(i), _node(k), _node(j)), float(worst[i, j]),
                f"d({_node(i)},{_node(j)}) exceeds path through {_node(k)}"))
    return out[:max_records]


def _node(i):
    # start is reported as "start", rewards by their 0-based index
    return "start" if i == 0 else int(i) - 1


def _field(i, j):
    return "start_distances" if i == 0 or j == 0 else "dist"


def _idx(i, j):
    if i == 0 and j == 0:
        return ()
    if i == 0 or j == 0:
        return (int(max(i, j)) - 1,)
    return (int(i) - 1, int(j) - 1)


def scale_instance(inst: RdtspInstance, c: float) -> RdtspInstance:
    """Multiply all lengths by ``c`` and replace gamma by gamma ** (1/c).

    Every tour keeps its value.
    """
    if not c > 0:
        raise ValidationError(f"scale factor must be positive, got {c}")
    meta = dict(inst.meta)
    meta["scaled_by"] = c * meta.get("scaled_by", 1.0)
    return RdtspInstance(
        gamma=inst.gamma ** (1.0 / c),
        start_distances=inst.start_distances * c,
        dist=inst.dist * c,
        coords=None if inst.coords is None else inst.coords * c,
        cluster_labels=inst.cluster_labels,
        meta=meta,
    )


def from_points(points, gamma: float, start=(0.0, 0.0), **kw) -> RdtspInstance:
    """Euclidean instance over planar points."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    s = np.asarray(start, dtype=np.float64)
    diff = p[:, None, :] - p[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    np.fill_diagonal(dist, 0.0)
    sd = np.sqrt(((p - s) ** 2).sum(-1))
    return RdtspInstance(gamma, sd, dist, coords=p, **kw)


def from_full_matrix(m, gamma: float, **kw) -> RdtspInstance:
    """Instance from an (n+1)x(n+1) metric whose node 0 is the start."""
    m = np.asarray(m, dtype=np.float64)
    return RdtspInstance(gamma, m[0, 1:], m[1:, 1:], **kw)
