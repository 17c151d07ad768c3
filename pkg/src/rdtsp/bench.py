"""Planning benchmark: N_MDP instances per (family, n), N_alg runs per stochastic policy.

Every raw value carries the seeds that produced it.  Instance seeds hash
(master, family, n, instance index); run seeds additionally hash the policy
and run index, so any single cell can be recomputed alone.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import GuardError, ValidationError
from .exact import HELD_KARP_MAX_N, held_karp, two_cluster_approx
from .generators import FAMILIES, generate
from .instance import RdtspInstance
from .policies import PolicyOutcome, policy_kind, run_policy
from .rng import derive_seed

DEFAULT_NS = (100, 200, 400, 600, 800, 1000)
DEFAULT_POLICIES = ("NN", "RNN", "NN_RDFS", "NN_RA")
DETERMINISTIC = ("NN",)
CSV_COLUMNS = ("family", "n", "instance_seed", "policy", "run_seed", "value", "ratio_ref",
               "reference", "elapsed_ms")
REFERENCES = ("auto", "held_karp", "two_cluster", "none")
AUTO_EXACT_MAX_N = 18


@dataclass(frozen=True)
class BenchConfig:
    families: tuple = ("random_cities",)
    ns: tuple = DEFAULT_NS
    n_mdp: int = 10
    n_alg: int = 100
    policies: tuple = DEFAULT_POLICIES
    reference: str = "auto"
    master_seed: int = 0
    family_params: dict = field(default_factory=dict)
    workers: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "ns", tuple(int(n) for n in self.ns))
        object.__setattr__(self, "policies", tuple(policy_kind(p) for p in self.policies))
        bad = [f for f in self.families if f not in FAMILIES]
        if bad:
            raise ValidationError(f"unknown families {bad}; known: {sorted(FAMILIES)}")
        if self.reference not in REFERENCES:
            raise ValidationError(f"reference must be one of {REFERENCES}")
        if self.n_mdp < 1 or self.n_alg < 1 or not self.ns or not self.policies:
            raise ValidationError("n_mdp, n_alg, ns and policies must be non-empty/positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Row:
    family: str
    n: int
    instance_seed: int
    policy: str
    run_seed: int
    value: float
    ratio_ref: float
    reference: float
    elapsed_ms: float


@dataclass(frozen=True)
class CellSummary:
    mean: float
    worst: float
    mean_ratio: float
    instance_means: tuple
    count: int


@dataclass
class BenchReport:
    rows: list
    meta: dict = field(default_factory=dict)

    def values(self, family, n, policy) -> list[float]:
        return [r.value for r in self.rows if (r.family, r.n, r.policy) == (family, n, policy)]

    def keys(self):
        seen = {}
        for r in self.rows:
            seen.setdefault((r.family, r.n, r.policy), None)
        return list(seen)

    def cell(self, family, n, policy) -> CellSummary:
        rows = [r for r in self.rows if (r.family, r.n, r.policy) == (family, n, policy)]
        if not rows:
            raise KeyError((family, n, policy))
        per = {}
        for r in rows:
            per.setdefault(r.instance_seed, []).append(r.value)
        inst_means = tuple(float(np.mean(v)) for v in per.values())
        ratios = [r.ratio_ref for r in rows]
        return CellSummary(float(np.mean([r.value for r in rows])), min(inst_means),
                           float(np.mean(ratios)) if not any(map(math.isnan, ratios)) else math.nan,
                           inst_means, len(rows))

    def summary(self) -> dict:
        return {k: self.cell(*k) for k in self.keys()}


def _reference(inst: RdtspInstance, kind: str):
    if kind == "none":
        return math.nan, "none"
    if kind == "held_karp" or (kind == "auto" and inst.n <= AUTO_EXACT_MAX_N):
        return held_karp(inst).value, "held_karp"
    # cores of 8..18 rewards go to Held-Karp (exact, and far cheaper than 10! orders)
    if inst.cluster_labels is not None:
        return two_cluster_approx(inst, exhaustive_max=7).value, "two_cluster"
    # unlabelled families: cluster by the pruning scale of the full-n RDFS threshold
    theta = inst.half_distance / math.sqrt(inst.n)
    return two_cluster_approx(inst, threshold=theta, exhaustive_max=7).value, "two_cluster"


def _run_cell(job):
    cfg, family, n, idx = job
    inst_seed = derive_seed("instance", cfg.master_seed, family, n, idx)
    inst = generate(family, n, inst_seed, **cfg.family_params.get(family, {}))
    ref, ref_name = _reference(inst, cfg.reference)
    rows = []
    for pol in cfg.policies:
        runs = 1 if pol in DETERMINISTIC else cfg.n_alg
        for r in range(runs):
            seed = derive_seed("run", cfg.master_seed, family, n, idx, pol, r)
            t0 = time.perf_counter()
            out: PolicyOutcome = run_policy(inst, pol, seed)
            ms = (time.perf_counter() - t0) * 1e3
            ratio = out.value / ref if ref == ref and ref > 0 else math.nan
            rows.append(Row(family, n, inst_seed, pol, seed, out.value, ratio, ref, ms))
    return rows, ref_name


def workers_from_env(requested=None) -> int:
    if requested is not None:
        return max(1, int(requested))
    return max(1, int(os.environ.get("RDTSP_WORKERS", "1")))


def run_bench(cfg: BenchConfig) -> BenchReport:
    if cfg.reference == "held_karp" and max(cfg.ns) > HELD_KARP_MAX_N:
        raise GuardError(f"held_karp reference refused for n={max(cfg.ns)} "
                         f"(limit {HELD_KARP_MAX_N})", guard="held_karp.max_n",
                         limit=HELD_KARP_MAX_N, value=max(cfg.ns))
    jobs = [(cfg, f, n, i) for f in cfg.families for n in cfg.ns for i in range(cfg.n_mdp)]
    w = workers_from_env(cfg.workers)
    if w > 1:
        with ProcessPoolExecutor(max_workers=w) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    rows = [row for res, _ in results for row in res]
    refs = sorted({name for _, name in results})
    meta = {"config": cfg.to_dict(), "config_hash": cfg.digest(), "references": refs,
            "reference_exact": refs in (["held_karp"], ["none"])}
    if "two_cluster" in refs:
        meta["caveat"] = "two_cluster reference is an approximation; ratios may exceed 1"
    return BenchReport(rows, meta)


# -- CSV --------------------------------------------------------------------

def _filter(rows, families=None, policies=None):
    out = [r for r in rows
           if (families is None or r.family in families)
           and (policies is None or r.policy in policies)]
    if not out:
        raise ValidationError("filter selects no benchmark rows")
    return out


def emit_csv(report: BenchReport, path, families=None, policies=None) -> Path:
    rows = _filter(report.rows, families, policies)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([r.family, r.n, r.instance_seed, r.policy, r.run_seed, repr(r.value),
                        repr(r.ratio_ref), repr(r.reference), repr(r.elapsed_ms)])
    return path


def parse_csv(path) -> BenchReport:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValidationError(f"unexpected CSV header {reader.fieldnames}")
        rows = [Row(d["family"], int(d["n"]), int(d["instance_seed"]), d["policy"],
                    int(d["run_seed"]), float(d["value"]), float(d["ratio_ref"]),
                    float(d["reference"]), float(d["elapsed_ms"])) for d in reader]
    if not rows:
        raise ValidationError(f"{path} holds no rows")
    return BenchReport(rows)


# -- SVG --------------------------------------------------------------------

PALETTE = ("#1b6ca8", "#d1495b", "#edae49", "#00798c", "#6a4c93", "#444444")
METRICS = ("mean", "worst", "ratio")


def _fmt(v):
    return f"{v:.2f}"


def emit_svg(report: BenchReport, metric: str = "mean", path=None, families=None,
             policies=None) -> str:
    """One panel per family: metric against n, one line per policy."""
    if metric not in METRICS:
        raise ValidationError(f"metric must be one of {METRICS}")
    rows = _filter(report.rows, families, policies)
    sub = BenchReport(rows)
    fams = list(dict.fromkeys(r.family for r in rows))
    pols = list(dict.fromkeys(r.policy for r in rows))
    W, H, pad = 360, 240, 40
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W * len(fams)}" '
             f'height="{H + 30}" font-family="sans-serif" font-size="11">']
    for f_i, fam in enumerate(fams):
        ns = sorted({r.n for r in rows if r.family == fam})
        series = {}
        for p in pols:
            pts = []
            for n in ns:
                try:
                    c = sub.cell(fam, n, p)
                except KeyError:
                    continue
                pts.append((n, {"mean": c.mean, "worst": c.worst, "ratio": c.mean_ratio}[metric]))
            series[p] = pts
        ys = [y for pts in series.values() for _, y in pts if y == y]
        lo, hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        x0 = f_i * W

        def sx(n):
            return x0 + pad + (0.5 if len(ns) == 1 else ns.index(n) / (len(ns) - 1)) * (W - 2 * pad)

        def sy(y):
            return H - pad + 10 - (y - lo) / (hi - lo) * (H - 2 * pad)

        parts.append(f'<text x="{x0 + W / 2:.1f}" y="16" text-anchor="middle">'
                     f'{fam}: {metric}</text>')
        parts.append(f'<rect x="{x0 + pad}" y="{pad - 10}" width="{W - 2 * pad}" '
                     f'height="{H - 2 * pad + 20}" fill="none" stroke="#999"/>')
        for n in ns:
            parts.append(f'<text x="{sx(n):.1f}" y="{H + 5}" text-anchor="middle">{n}</text>')
        parts.append(f'<text x="{x0 + pad - 4}" y="{sy(hi):.1f}" text-anchor="end">{_fmt(hi)}</text>')
        parts.append(f'<text x="{x0 + pad - 4}" y="{sy(lo):.1f}" text-anchor="end">{_fmt(lo)}</text>')
        for k, p in enumerate(pols):
            pts = [(sx(n), sy(y)) for n, y in series[p] if y == y]
            color = PALETTE[k % len(PALETTE)]
            if pts:
                path_d = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
                parts.append(f'<polyline points="{path_d}" fill="none" stroke="{color}" '
                             f'stroke-width="2"/>')
                parts.extend(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="{color}"/>'
                             for x, y in pts)
            parts.append(f'<text x="{x0 + pad + 4}" y="{H + 22}" dx="{k * 70}" '
                         f'fill="{color}">{p}</text>')
    parts.append("</svg>")
    svg = "\n".join(parts) + "\n"
    if path is not None:
        Path(path).write_text(svg)
    return svg


def tour_plot(inst: RdtspInstance, outcome, k: int = 8, path=None, size: int = 400) -> str:
    """Point set plus a polyline through the start and the first max(1, n // k) rewards."""
    if inst.coords is None:
        raise ValidationError("tour_plot needs planar coordinates")
    if k < 1:
        raise ValidationError("k must be >= 1")
    order = list(outcome.order if hasattr(outcome, "order") else outcome)
    m = max(1, inst.n // k)
    pts = np.vstack([[0.0, 0.0], inst.coords])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    pad = 10

    def xy(p):
        q = (p - lo) / span * (size - 2 * pad) + pad
        return q[0], size - q[1]

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">']
    parts.extend(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="2" fill="#888"/>'
                 for x, y in (xy(p) for p in inst.coords))
    path_pts = [xy(pts[0])] + [xy(inst.coords[i]) for i in order[:m]]
    parts.append('<polyline points="' + " ".join(f"{x:.1f},{y:.1f}" for x, y in path_pts)
                 + '" fill="none" stroke="#d1495b" stroke-width="1.5"/>')
    sx, sy = xy(pts[0])
    parts.append(f'<rect x="{sx - 4:.1f}" y="{sy - 4:.1f}" width="8" height="8" fill="#1b6ca8"/>')
    parts.append("</svg>")
    svg = "\n".join(parts) + "\n"
    if path is not None:
        Path(path).write_text(svg)
    return svg
