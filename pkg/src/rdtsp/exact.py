"""Reference solvers for RD-TSP.

``held_karp`` is exact: it runs the Bellman recursion over (collected set,
current reward), which is the fixed point tabular Q-learning on the option
SMDP converges to.  ``held_karp_forward`` keeps a single (length, value)
pair per (set, last reward) and picks the value-maximising predecessor; it
is not exact in general and is kept to measure how often it is wrong.
"""

from __future__ import annotations

import itertools
import math
import time
from functools import lru_cache

import numpy as np

from .errors import GuardError, ValidationError
from .instance import RdtspInstance, Tour, make_tour
from .policies import nn_complete, prune_components

BRUTE_FORCE_MAX_N = 10
HELD_KARP_MAX_N = 20
DSTAR_MAX_RAYS = 4
DSTAR_MAX_N = 40
TIE_TOL = 1e-12
LAYOUT_TOL = 1e-9


def _timed(fn):
    def wrapper(inst, *args, **kw):
        t0 = time.perf_counter()
        tour = fn(inst, *args, **kw)
        ms = (time.perf_counter() - t0) * 1e3
        return Tour(tour.order, tour.value, tour.solver, ms, tour.meta)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _first_near_max(values, tol=TIE_TOL):
    best = values.max()
    return int(np.argmax(values >= best - tol * max(1.0, abs(best))))


@lru_cache(maxsize=4)
def _permutations(n):
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int8)
    perms.setflags(write=False)
    return perms


@_timed
def brute_force_opt(inst: RdtspInstance, max_n: int = BRUTE_FORCE_MAX_N) -> Tour:
    """Enumerate all n! orders; ties go to the lexicographically smallest."""
    n = inst.n
    if n > max_n:
        raise GuardError(f"brute_force_opt refuses n={n} > max_n={max_n}",
                         guard="max_n", limit=max_n, value=n)
    if n == 0:
        return make_tour(inst, [], "brute_force")
    perms = _permutations(n).astype(np.intp)
    lg = math.log(inst.gamma)
    cum = inst.start_distances[perms[:, 0]].copy()
    vals = np.exp(cum * lg)
    for t in range(1, n):
        cum += inst.dist[perms[:, t - 1], perms[:, t]]
        vals += np.exp(cum * lg)
    return make_tour(inst, perms[_first_near_max(vals)].tolist(), "brute_force")


def _popcount_layers(n):
    masks = np.arange(1 << n, dtype=np.int64)
    pc = np.zeros(1 << n, dtype=np.int8)
    for j in range(n):
        pc += ((masks >> j) & 1).astype(np.int8)
    return [masks[pc == p] for p in range(n + 1)]


def _guard_hk(n, max_n, name):
    if n > max_n:
        raise GuardError(f"{name} refuses n={n} > max_n={max_n} (table is n*2^n)",
                         guard="max_n", limit=max_n, value=n)


def held_karp_table(inst: RdtspInstance, max_n: int = HELD_KARP_MAX_N) -> np.ndarray:
    """F[S, k]: best discounted value still to come when standing on k with S collected.

    Values are measured from the moment k is reached, so the value of the
    whole tour is max_j gamma^d(0,j) * (1 + F[{j}, j]).
    """
    n = inst.n
    _guard_hk(n, max_n, "held_karp")
    g = inst.gamma ** inst.dist
    F = np.zeros((1 << n, n))
    layers = _popcount_layers(n)
    for p in range(n - 1, 0, -1):
        layer = layers[p]
        for j in range(n):
            sel = layer[((layer >> j) & 1) == 0]
            if sel.size == 0:
                continue
            gain = 1.0 + F[sel | (1 << j), j]
            F[sel] = np.maximum(F[sel], gain[:, None] * g[:, j][None, :])
    return F


@_timed
def held_karp(inst: RdtspInstance, max_n: int = HELD_KARP_MAX_N) -> Tour:
    """Exact subset dynamic program, O(n^2 2^n) time and O(n 2^n) memory."""
    n = inst.n
    if n == 0:
        return make_tour(inst, [], "held_karp")
    F = held_karp_table(inst, max_n)
    g = inst.gamma ** inst.dist
    first = inst.gamma ** inst.start_distances * (1.0 + F[1 << np.arange(n), np.arange(n)])
    k = _first_near_max(first)
    order, S = [k], 1 << k
    while len(order) < n:
        free = np.array([j for j in range(n) if not (S >> j) & 1])
        cand = g[k, free] * (1.0 + F[S | (1 << free), free])
        k = int(free[_first_near_max(cand)])
        order.append(k)
        S |= 1 << k
    return make_tour(inst, order, "held_karp")


@_timed
def held_karp_forward(inst: RdtspInstance, max_n: int = HELD_KARP_MAX_N) -> Tour:
    """Forward recursion with one (C, V) pair per (S, k), value-argmax predecessor."""
    n = inst.n
    _guard_hk(n, max_n, "held_karp_forward")
    if n == 0:
        return make_tour(inst, [], "held_karp_forward")
    lg = math.log(inst.gamma)
    g = inst.gamma ** inst.dist
    C = np.full((1 << n, n), np.inf)
    V = np.full((1 << n, n), -np.inf)
    pred = np.full((1 << n, n), -1, dtype=np.int8)
    idx = np.arange(n)
    C[1 << idx, idx] = inst.start_distances
    V[1 << idx, idx] = np.exp(inst.start_distances * lg)
    layers = _popcount_layers(n)
    for s in range(2, n + 1):
        layer = layers[s]
        for k in range(n):
            sel = layer[((layer >> k) & 1) == 1]
            prev = sel ^ (1 << k)
            member = ((prev[:, None] >> idx[None, :]) & 1) == 1
            Q = np.where(member, V[prev] + np.exp(C[prev] * lg) * g[:, k][None, :], -np.inf)
            a = np.argmax(Q, axis=1)
            V[sel, k] = Q[np.arange(sel.size), a]
            C[sel, k] = C[prev, a] + inst.dist[a, k]
            pred[sel, k] = a
    full = (1 << n) - 1
    k = int(np.argmax(V[full]))
    order, S = [], full
    while k >= 0:
        order.append(k)
        k, S = int(pred[S, k]), S ^ (1 << k)
    order.reverse()
    tour = make_tour(inst, order, "held_karp_forward")
    return Tour(tour.order, tour.value, tour.solver, 0.0,
                {"recursion_value": float(V[full].max())})


# -- line --------------------------------------------------------------------

def _close(a, b):
    return abs(a - b) <= LAYOUT_TOL * (1.0 + abs(a) + abs(b))


def check_line_layout(inst: RdtspInstance, positions) -> np.ndarray:
    p = np.asarray(positions, dtype=np.float64)
    if p.shape != (inst.n,):
        raise ValidationError(f"line layout needs {inst.n} positions, got {p.shape}")
    for i in range(inst.n):
        if not _close(abs(p[i]), inst.start_distances[i]):
            raise ValidationError(f"reward {i}: |position|={abs(p[i])} but start distance "
                                  f"{inst.start_distances[i]}")
        for j in range(i + 1, inst.n):
            if not _close(abs(p[i] - p[j]), inst.dist[i, j]):
                raise ValidationError(f"rewards {i},{j}: layout gap {abs(p[i] - p[j])} but "
                                      f"distance {inst.dist[i, j]}")
    return p


def infer_line_layout(inst: RdtspInstance) -> np.ndarray:
    """Signed positions reproducing the metric, start at 0, farthest reward on the + side."""
    if "layout" in inst.meta and inst.meta.get("layout_kind") == "line":
        return check_line_layout(inst, inst.meta["layout"])
    sd = inst.start_distances
    if inst.n == 0:
        return np.zeros(0)
    r = int(np.argmax(sd))
    p = np.array([sd[i] if _close(abs(sd[i] - sd[r]), inst.dist[i, r]) else -sd[i]
                  for i in range(inst.n)])
    return check_line_layout(inst, p)


@_timed
def line_dp(inst: RdtspInstance, positions=None) -> Tour:
    """Interval DP: the collected set is always a contiguous interval around the start.

    State (a, b, side): the a nearest left rewards and b nearest right rewards
    are collected and the agent stands on the last one taken on ``side``.
    Equal values go left first.
    """
    p = infer_line_layout(inst) if positions is None else check_line_layout(inst, positions)
    left = sorted((i for i in range(inst.n) if p[i] < 0), key=lambda i: (-p[i], i))
    right = sorted((i for i in range(inst.n) if p[i] >= 0), key=lambda i: (p[i], i))
    L, R = len(left), len(right)
    gam = inst.gamma

    def pos(a, b, side):
        if side == "L":
            return p[left[a - 1]]
        if side == "R":
            return p[right[b - 1]]
        return 0.0

    W = {}
    choice = {}
    for total in range(L + R, -1, -1):
        for a in range(max(0, total - R), min(L, total) + 1):
            b = total - a
            for side in ("L", "R") if total else ("O",):
                if side == "L" and a == 0 or side == "R" and b == 0:
                    continue
                here = pos(a, b, side)
                best, pick = 0.0, None
                if a < L:
                    v = gam ** abs(here - p[left[a]]) * (1.0 + W[(a + 1, b, "L")])
                    best, pick = v, "L"
                if b < R:
                    v = gam ** abs(here - p[right[b]]) * (1.0 + W[(a, b + 1, "R")])
                    if pick is None or v > best + TIE_TOL * max(1.0, best):
                        best, pick = v, "R"
                W[(a, b, side)] = best
                choice[(a, b, side)] = pick
    order, a, b, side = [], 0, 0, "O"
    while a + b < L + R:
        side = choice[(a, b, side)]
        if side == "L":
            order.append(left[a])
            a += 1
        else:
            order.append(right[b])
            b += 1
    return make_tour(inst, order, "line_dp")


# -- d-star ------------------------------------------------------------------

def check_star_layout(inst: RdtspInstance, rays) -> list[list[int]]:
    rays = [[int(i) for i in ray] for ray in rays]
    flat = [i for ray in rays for i in ray]
    if sorted(flat) != list(range(inst.n)):
        raise ValidationError("star layout must list every reward exactly once")
    sd = inst.start_distances
    ray_of = {i: r for r, ray in enumerate(rays) for i in ray}
    for ray in rays:
        for a, b in zip(ray, ray[1:]):
            if sd[b] < sd[a] - LAYOUT_TOL:
                raise ValidationError(f"ray {ray} is not ordered outward")
    for i in range(inst.n):
        for j in range(i + 1, inst.n):
            want = abs(sd[i] - sd[j]) if ray_of[i] == ray_of[j] else sd[i] + sd[j]
            if not _close(want, inst.dist[i, j]):
                raise ValidationError(f"rewards {i},{j}: star layout implies {want} but "
                                      f"distance is {inst.dist[i, j]}")
    return rays


def infer_star_layout(inst: RdtspInstance) -> list[list[int]]:
    if "layout" in inst.meta and inst.meta.get("layout_kind") == "star":
        return check_star_layout(inst, inst.meta["layout"])
    sd = inst.start_distances
    rays: list[list[int]] = []
    for i in sorted(range(inst.n), key=lambda i: (sd[i], i)):
        for ray in rays:
            j = ray[-1]
            if sd[j] > LAYOUT_TOL and _close(inst.dist[i, j], sd[i] - sd[j]):
                ray.append(i)
                break
        else:
            rays.append([i])
    return check_star_layout(inst, rays)


@_timed
def dstar_dp(inst: RdtspInstance, rays=None, max_rays: int = DSTAR_MAX_RAYS,
             max_n: int = DSTAR_MAX_N) -> Tour:
    """DP over frontier vectors of a star whose centre is the start.

    ``rays`` lists reward indices per ray ordered outward.  Only states whose
    current position is the last collected reward of some ray (or the centre
    at time zero) are ever generated.
    """
    rays = infer_star_layout(inst) if rays is None else check_star_layout(inst, rays)
    d = len(rays)
    if d > max_rays or inst.n > max_n:
        raise GuardError(f"dstar_dp refuses d={d}, n={inst.n} (limits d<={max_rays}, "
                         f"n<={max_n})", guard="state_bound", limit=(max_rays, max_n),
                         value=(d, inst.n))
    sd = inst.start_distances
    gam = inst.gamma
    sizes = tuple(len(r) for r in rays)

    @lru_cache(maxsize=None)
    def W(front, cur):
        here = 0.0 if cur < 0 else sd[rays[cur][front[cur] - 1]]
        best, pick = 0.0, None
        for r in range(d):
            if front[r] == sizes[r]:
                continue
            target = rays[r][front[r]]
            q = sd[target]
            leg = q - here if r == cur else q + here
            nxt = front[:r] + (front[r] + 1,) + front[r + 1:]
            v = gam ** leg * (1.0 + W(nxt, r)[0])
            if pick is None or v > best + TIE_TOL * max(1.0, best) or (
                    abs(v - best) <= TIE_TOL * max(1.0, best) and target < rays[pick][front[pick]]):
                best, pick = v, r
        return best, pick

    front, cur, order = (0,) * d, -1, []
    while len(order) < inst.n:
        r = W(front, cur)[1]
        order.append(rays[r][front[r]])
        front = front[:r] + (front[r] + 1,) + front[r + 1:]
        cur = r
    W.cache_clear()
    return make_tour(inst, order, "dstar_dp")


# -- two-cluster approximation ---------------------------------------------

def _clusters(inst, threshold):
    if inst.cluster_labels is not None and threshold is None:
        labels = inst.cluster_labels
        groups = [np.nonzero(labels == c)[0].tolist() for c in np.unique(labels)]
    elif threshold is not None:
        groups = prune_components(inst, threshold)
    else:
        raise ValidationError("two_cluster_approx needs cluster_labels or a threshold")
    groups = [g for g in groups if g]
    if not groups:
        raise ValidationError("no clusters derivable")
    return groups


def _sub_instance(inst, idx):
    idx = np.asarray(idx)
    return RdtspInstance(inst.gamma, inst.start_distances[idx], inst.dist[np.ix_(idx, idx)])


def _nn_within(inst, here_row, members):
    """NN order over ``members`` starting from a position with distances ``here_row``."""
    members = list(members)
    out = []
    row = here_row
    while members:
        k = min(members, key=lambda j: (row[j], j))
        out.append(k)
        members.remove(k)
        row = inst.dist[k]
    return out


def two_cluster_approx(inst: RdtspInstance, threshold: float | None = None,
                       exhaustive_max: int = 10, dp_max: int = 18,
                       max_clusters: int = 12, max_entries: int = 8,
                       include_nn: bool = True) -> Tour:
    """Best tour over choices of the first two clusters, the rest appended by NN.

    The core of each pair (A, B) is ordered exactly when small enough
    (enumeration up to ``exhaustive_max`` rewards, Held-Karp up to
    ``dp_max``); otherwise A and then B are swept by NN from the best of
    ``max_entries`` entry points and the result is flagged approximate.
    With ``include_nn`` the plain NN tour from the start is a candidate too,
    so the result never falls below NN.
    """
    t0 = time.perf_counter()
    groups = _clusters(inst, threshold)
    sd = inst.start_distances
    by_start = sorted(range(len(groups)), key=lambda c: min(sd[i] for i in groups[c]))
    firsts = by_start[:max_clusters]

    def gap(a, b):
        return inst.dist[np.ix_(groups[a], groups[b])].min()

    pairs = []
    for a in firsts:
        others = sorted((b for b in range(len(groups)) if b != a), key=lambda b: (gap(a, b), b))
        pairs.extend((a, b) for b in others[:max_clusters])
        if len(groups) == 1:
            pairs.append((a, None))

    best = make_tour(inst, nn_complete(inst, [])) if include_nn else None
    approximate = False
    seen_cores = {}
    for a, b in pairs:
        A = groups[a]
        B = [] if b is None else groups[b]
        core = sorted(A + B)
        if len(core) <= dp_max:
            key = tuple(core)
            if key not in seen_cores:
                sub = _sub_instance(inst, core)
                solver = brute_force_opt if len(core) <= exhaustive_max else held_karp
                seen_cores[key] = [core[i] for i in solver(sub, max_n=len(core)).order]
            prefix = seen_cores[key]
        else:
            approximate = True
            entries = sorted(A, key=lambda i: (sd[i], i))[:max_entries]
            prefix, pv = None, -1.0
            for e in entries:
                pa = [e] + _nn_within(inst, inst.dist[e], [i for i in A if i != e])
                pb = _nn_within(inst, inst.dist[pa[-1]], B)
                cand = pa + pb
                v = make_tour(inst, cand).value
                if v > pv:
                    prefix, pv = cand, v
        order = nn_complete(inst, prefix)
        tour = make_tour(inst, order)
        if best is None or tour.value > best.value:
            best = tour
    ms = (time.perf_counter() - t0) * 1e3
    return Tour(best.order, best.value, "two_cluster_approx", ms,
                {"approximate": approximate, "clusters": len(groups)})
