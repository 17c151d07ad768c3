"""Seeded instance families.

Planar families sample points and use Euclidean distances with the start
at the origin.  Graph families (star_clique, nn_trap) are written down as
their shortest-path metric directly.  Unless overridden, gamma = 1 - 1/n,
``x`` is the half-discount distance log_{1/gamma}(2) and the short length
``ell`` is x/100.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .instance import RdtspInstance, from_points
from .rng import make_rng


@dataclass(frozen=True)
class GenSpec:
    family: str
    n: int
    seed: int = 0
    params: dict = field(default_factory=dict)

    def build(self) -> RdtspInstance:
        return generate(self.family, self.n, self.seed, **self.params)


def default_gamma(n: int) -> float:
    # n = 1 would give gamma = 0, which is outside (0, 1)
    return 1.0 - 1.0 / max(n, 2)


def half_distance(gamma: float) -> float:
    return math.log(2.0) / -math.log(gamma)


def _scales(n, gamma):
    gamma = default_gamma(n) if gamma is None else float(gamma)
    x = half_distance(gamma)
    return gamma, x, 0.01 * x


def _meta(family, seed, **params):
    return {"generator": family, "params": params, "seed": seed}


def _group_sizes(n, groups):
    # remainders go round-robin starting with the first group
    return [n // groups + (1 if g < n % groups else 0) for g in range(groups)]


def _check_n(n, least=1):
    if int(n) != n or n < least:
        raise ValidationError(f"n must be an integer >= {least}, got {n}")
    return int(n)


def gen_random_cities(n, seed=0, gamma=None):
    n = _check_n(n)
    gamma, x, _ = _scales(n, gamma)
    rng = make_rng(seed)
    pts = rng.uniform(0.0, x, size=(n, 2))
    return from_points(pts, gamma, meta=_meta("random_cities", seed, x=x))


def gen_line3(n, seed=0, gamma=None):
    n = _check_n(n)
    gamma, x, ell = _scales(n, gamma)
    rng = make_rng(seed)
    s1, s2, s3 = _group_sizes(n, 3)
    g1 = np.column_stack([rng.uniform(-x / 3 - ell, -x / 3 + ell, s1), rng.normal(0, ell, s1)])
    g2 = np.column_stack([rng.uniform(x / 3 - 3 * ell, x / 3 - 2 * ell, s2), rng.normal(0, ell, s2)])
    with np.errstate(over="ignore"):
        g3 = np.column_stack([(x / 3) * 2.0 ** np.arange(1, s3 + 1), np.zeros(s3)])
    pts = np.vstack([g1, g2, g3])
    if not np.isfinite(pts).all():
        raise ValidationError(f"line3 group 3 overflows double precision at n={n}")
    labels = np.repeat([0, 1, 2], [s1, s2, s3])
    return from_points(pts, gamma, cluster_labels=labels,
                       meta=_meta("line3", seed, x=x, ell=ell))


def cluster_centre_angles(rng, k, radius, min_separation):
    """k angles on a circle; adjacent centres at least ``min_separation`` apart (chord)."""
    if min_separation <= 0:
        return np.sort(rng.uniform(0, 2 * np.pi, k))
    g_min = 2 * math.asin(min(1.0, min_separation / (2 * radius)))
    slack = 2 * np.pi - k * g_min
    if slack < 0:
        raise ValidationError(f"cannot place {k} centres {min_separation} apart on radius {radius}")
    gaps = g_min + slack * rng.dirichlet(np.ones(k))
    return rng.uniform(0, 2 * np.pi) + np.concatenate([[0.0], np.cumsum(gaps[:-1])])


def gen_random_clusters(n, seed=0, k=10, gamma=None, min_separation=None):
    """Rewards in k square boxes of half-width 10*ell centred on a circle of radius x.

    Centre angles are uniform subject to a minimum chord ``min_separation``
    (default 58*ell, just over two box diagonals) so that clusters never
    overlap; pass 0 for unconstrained uniform angles.
    """
    n = _check_n(n)
    gamma, x, ell = _scales(n, gamma)
    sep = 58 * ell if min_separation is None else float(min_separation)
    rng = make_rng(seed)
    ang = cluster_centre_angles(rng, k, x, sep)
    centres = x * np.column_stack([np.cos(ang), np.sin(ang)])
    labels = rng.integers(k, size=n)
    pts = centres[labels] + rng.uniform(-10 * ell, 10 * ell, size=(n, 2))
    return from_points(pts, gamma, cluster_labels=labels,
                       meta=_meta("random_clusters", seed, k=k, x=x, ell=ell,
                                  min_separation=sep, centres=centres.tolist()))


def gen_circle(n, seed=0, gamma=None):
    """floor(sqrt(n)) concentric rings of floor(sqrt(n)) equally spaced rewards.

    The instance holds m*m rewards; gamma and the radii use that count.
    """
    n = _check_n(n)
    m = max(1, math.isqrt(n))
    size = m * m
    gamma, x, _ = _scales(size, gamma)
    rng = make_rng(seed)
    radii = (x / math.sqrt(size)) * (1 + size ** -0.25) ** np.arange(1, m + 1)
    phase = rng.uniform(0, 2 * np.pi, m)
    ang = phase[:, None] + 2 * np.pi * np.arange(m)[None, :] / m
    pts = np.column_stack([(radii[:, None] * np.cos(ang)).ravel(),
                           (radii[:, None] * np.sin(ang)).ravel()])
    labels = np.repeat(np.arange(m), m)
    return from_points(pts, gamma, cluster_labels=labels,
                       meta=_meta("circle", seed, requested_n=n, rings=m,
                                  radii=radii.tolist(), x=x))


def gen_rural_urban(n, seed=0, gamma=None):
    n = _check_n(n)
    gamma, x, ell = _scales(n, gamma)
    rng = make_rng(seed)
    n_city, n_village = _group_sizes(n, 2)
    city = np.column_stack([rng.normal(x, ell, n_city), rng.normal(0, ell, n_city)])
    village = np.column_stack([rng.normal(-x, 10 * x, n_village), rng.normal(0, 10 * x, n_village)])
    labels = np.repeat([0, 1], [n_city, n_village])
    return from_points(np.vstack([city, village]), gamma, cluster_labels=labels,
                       meta=_meta("rural_urban", seed, x=x, ell=ell))


def gen_star_clique(n, clique_size=None, gamma=None, seed=0, adversarial_order=None,
                    variant="det"):
    """Star of n spokes of length d (gamma**d = 1/2) with a hidden clique of unit edges.

    ``variant="det"`` defaults to clique_size = n/2 and gamma = 1 - 1/n,
    ``variant="stoch"`` to clique_size = floor(sqrt(n)) and gamma = 1 - 1/sqrt(n).
    ``adversarial_order`` is the order in which some deterministic policy
    would visit the leaves of the plain star; the clique is put on the last
    ``clique_size`` of them.  The default (identity) defeats lowest-index
    tie-breaking.  Pass ``"random"`` for a seeded random clique.
    """
    n = _check_n(n)
    if variant == "det":
        clique_size = n // 2 if clique_size is None else clique_size
        gamma = default_gamma(n) if gamma is None else gamma
    elif variant == "stoch":
        clique_size = math.isqrt(n) if clique_size is None else clique_size
        gamma = 1.0 - 1.0 / max(math.sqrt(n), 2.0) if gamma is None else gamma
    else:
        raise ValidationError(f"unknown star_clique variant {variant!r}")
    clique_size = int(clique_size)
    if not 0 <= clique_size <= n:
        raise ValidationError(f"clique_size {clique_size} not in [0, {n}]")
    gamma = float(gamma)
    d = half_distance(gamma)

    if adversarial_order is None:
        visit = np.arange(n)
    elif isinstance(adversarial_order, str) and adversarial_order == "random":
        visit = make_rng(seed).permutation(n)
    else:
        visit = np.asarray(adversarial_order, dtype=np.int64)
        if sorted(visit.tolist()) != list(range(n)):
            raise ValidationError("adversarial_order must be a permutation of range(n)")
    clique = np.sort(visit[n - clique_size:]) if clique_size else np.zeros(0, dtype=np.int64)
    member = np.zeros(n, dtype=bool)
    member[clique] = True

    dist = np.full((n, n), 2 * d)
    both = member[:, None] & member[None, :]
    dist[both] = min(1.0, 2 * d)
    np.fill_diagonal(dist, 0.0)
    meta = _meta("star_clique", seed, clique_size=clique_size, variant=variant,
                 spoke=d, gamma=gamma, clique=clique.tolist())
    return RdtspInstance(gamma, np.full(n, d), dist, cluster_labels=member.astype(np.int64),
                         meta=meta)


def star_clique_clique_first(inst: RdtspInstance) -> list[int]:
    """The tour used as the analytic OPT: the clique first, then the other leaves."""
    clique = list(inst.meta["params"]["clique"])
    rest = [i for i in range(inst.n) if i not in set(clique)]
    return clique + rest


def gen_nn_trap(n, L=None, l=None, seed=0, gamma=None, eps=None):
    """One reward at distance L on the right, n-1 rewards in a room at L + l on the left.

    Room rewards are pairwise ``eps`` apart (default l/100).  Defaults:
    L = x, l = x/100.  Index 0 is the lone right-hand reward.
    """
    n = _check_n(n)
    gamma, x, ell = _scales(n, gamma)
    L = x if L is None else float(L)
    l = ell if l is None else float(l)
    eps = l / 100 if eps is None else float(eps)
    if not (L > 0 and l >= 0 and eps >= 0):
        raise ValidationError("nn_trap needs L > 0, l >= 0, eps >= 0")
    sd = np.full(n, L + l)
    sd[0] = L
    dist = np.full((n, n), min(eps, 2 * (L + l)))
    dist[0, :] = dist[:, 0] = 2 * L + l
    np.fill_diagonal(dist, 0.0)
    labels = np.ones(n, dtype=np.int64)
    labels[0] = 0
    return RdtspInstance(gamma, sd, dist, cluster_labels=labels,
                         meta=_meta("nn_trap", seed, L=L, l=l, eps=eps))


def gen_line(n, seed=0, gamma=None, extent=None):
    """Rewards at uniform signed positions on a line through the start."""
    n = _check_n(n)
    gamma, x, _ = _scales(n, gamma)
    extent = x if extent is None else float(extent)
    p = make_rng(seed).uniform(-extent, extent, n)
    inst = from_points(np.column_stack([p, np.zeros(n)]), gamma,
                       meta=_meta("line", seed, extent=extent))
    inst.meta.update(layout_kind="line", layout=p.tolist())
    return inst


def gen_star(n, seed=0, rays=3, gamma=None, extent=None):
    """Rewards on ``rays`` rays out of the start, round-robin, uniform radii."""
    n = _check_n(n)
    gamma, x, _ = _scales(n, gamma)
    extent = x if extent is None else float(extent)
    rng = make_rng(seed)
    ray_of = np.arange(n) % rays
    r = rng.uniform(0, extent, n)
    same = ray_of[:, None] == ray_of[None, :]
    dist = np.where(same, np.abs(r[:, None] - r[None, :]), r[:, None] + r[None, :])
    np.fill_diagonal(dist, 0.0)
    layout = [sorted(np.nonzero(ray_of == k)[0].tolist(), key=lambda i: (r[i], i))
              for k in range(rays)]
    layout = [ray for ray in layout if ray]
    meta = _meta("star", seed, rays=rays, extent=extent)
    meta.update(layout_kind="star", layout=layout)
    return RdtspInstance(gamma, r, dist, cluster_labels=ray_of, meta=meta)


FAMILIES = {
    "random_cities": gen_random_cities,
    "line3": gen_line3,
    "random_clusters": gen_random_clusters,
    "circle": gen_circle,
    "rural_urban": gen_rural_urban,
    "star_clique": gen_star_clique,
    "nn_trap": gen_nn_trap,
    "line": gen_line,
    "star": gen_star,
}
PLANNING_FAMILIES = ("random_cities", "line3", "random_clusters", "circle", "rural_urban")


def generate(family: str, n: int, seed: int = 0, **params) -> RdtspInstance:
    try:
        fn = FAMILIES[family]
    except KeyError:
        raise ValidationError(f"unknown family {family!r}; known: {sorted(FAMILIES)}") from None
    return fn(n, seed=seed, **params)
