"""Command line entry point: ``rdtsp {generate,solve,bench,learn,plot}``.

Exit codes: 0 success, 2 usage or guard refusal, 3 invalid data.  Errors
are written to stderr as one JSON object.  Every run first writes the
resolved seed and a hash of its configuration to stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

from . import exact
from .bench import BenchConfig, emit_csv, emit_svg, parse_csv, run_bench, tour_plot
from .errors import GuardError, ValidationError
from .generators import FAMILIES, generate
from .gridworld import Maze, TrainConfig, evaluate_phases, fixture_maze, train_options
from .instance import RdtspInstance, validate_instance
from .policies import POLICIES, policy_kind, run_policy

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3

SOLVERS = {
    "brute_force": exact.brute_force_opt,
    "held_karp": exact.held_karp,
    "held_karp_forward": exact.held_karp_forward,
    "line_dp": exact.line_dp,
    "dstar_dp": exact.dstar_dp,
    "two_cluster": exact.two_cluster_approx,
}
POLICY_NAMES = {k.lower(): k for k in POLICIES}
EVAL_POLICIES = ("OPT", "RNN", "NN_RDFS", "NN_RA", "NN", "RAND")


class UsageError(Exception):
    pass


def _hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _announce(seed, config):
    print(json.dumps({"seed": seed, "config_hash": _hash(config)}), file=sys.stderr)


def _write(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _parse_params(pairs):
    params = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            params[k] = json.loads(v)
        except json.JSONDecodeError:
            params[k] = v
    return params


def _load_instance(path) -> RdtspInstance:
    try:
        inst = RdtspInstance.load(path)
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read instance {path}: {e}") from e
    bad = validate_instance(inst)
    if bad:
        raise ValidationError(f"instance {path} violates {len(bad)} invariant(s)",
                              violations=[v.__dict__ for v in bad])
    return inst


def cmd_generate(a):
    params = _parse_params(a.param)
    _announce(a.seed, {"family": a.family, "n": a.n, "params": params})
    inst = generate(a.family, a.n, a.seed, **params)
    _write(inst.to_json() + "\n", a.out)


def cmd_solve(a):
    name = a.solver.lower()
    if name not in SOLVERS and name not in POLICY_NAMES:
        raise UsageError(f"unknown solver {a.solver!r}; known: "
                         f"{sorted(SOLVERS) + sorted(POLICY_NAMES)}")
    _announce(a.seed, {"instance": str(a.instance), "solver": name})
    inst = _load_instance(a.instance)
    if name in SOLVERS:
        doc = SOLVERS[name](inst).to_dict()
    else:
        # wall time goes to stderr so that stdout depends on (instance, seed) only
        t0 = time.perf_counter()
        out = run_policy(inst, POLICY_NAMES[name], a.seed)
        ms = (time.perf_counter() - t0) * 1e3
        print(json.dumps({"elapsed_ms": round(ms, 3)}), file=sys.stderr)
        doc = out.to_dict() if a.trace else {**out.tour.to_dict(), "elapsed_ms": None,
                                              "seed": a.seed, "draws": out.draws}
    _write(json.dumps(doc) + "\n", a.out)


def cmd_bench(a):
    cfg_dict = json.loads(Path(a.config).read_text()) if a.config else {}
    if a.seed is not None:
        cfg_dict["master_seed"] = a.seed
    if a.workers is not None:
        cfg_dict["workers"] = a.workers
    cfg = BenchConfig.from_dict(cfg_dict)
    _announce(cfg.master_seed, cfg.to_dict())
    report = run_bench(cfg)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_csv(report, out / "report.csv")
    summary = [{"family": f, "n": n, "policy": p, "mean": c.mean, "worst": c.worst,
                "mean_ratio": c.mean_ratio, "count": c.count}
               for (f, n, p), c in report.summary().items()]
    (out / "summary.json").write_text(json.dumps({"meta": report.meta, "cells": summary}, indent=1))
    for metric in ("mean", "worst"):
        emit_svg(report, metric, out / f"{metric}.svg")


def cmd_learn(a):
    cfg_dict = json.loads(Path(a.config).read_text()) if a.config else {}
    if a.workers is not None:
        cfg_dict["workers"] = a.workers
    cfg = TrainConfig.from_dict(cfg_dict)
    maze = Maze.load(a.maze) if a.maze else fixture_maze()
    _announce(a.seed, {"maze": maze.to_text(), "train": cfg.to_dict(),
                       "eval_seeds": a.eval_seeds})
    options, log = train_options(maze, cfg, a.seed)
    seeds = range(a.eval_seeds)
    last = [len(log.snapshots) - 1] if a.final_only else None
    prows = evaluate_phases(maze, log, options.gamma, EVAL_POLICIES, seeds, cfg.slip, last)
    cols = ["phase", "option_id", "success", "gap", "policy", "mean_return"]
    buf = sys.stdout if not a.out else open(a.out, "w", newline="")
    try:
        w = csv.DictWriter(buf, fieldnames=cols, restval="")
        w.writeheader()
        w.writerows(log.rows)
        w.writerows(prows)
    finally:
        if a.out:
            buf.close()


def cmd_plot(a):
    _announce(a.seed, {"in": str(a.inp), "metric": a.metric, "instance": a.instance})
    if a.instance:
        inst = _load_instance(a.instance)
        out = run_policy(inst, policy_kind(a.policy), a.seed)
        _write(tour_plot(inst, out, k=a.k), a.out)
        return
    if not a.inp:
        raise UsageError("plot needs --in report.csv or --instance inst.json")
    _write(emit_svg(parse_csv(a.inp), a.metric), a.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdtsp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", help="write a seeded instance as JSON")
    g.add_argument("--family", required=True, choices=sorted(FAMILIES))
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--param", action="append", metavar="KEY=VALUE")
    g.add_argument("--out")
    g.set_defaults(fn=cmd_generate)

    s = sub.add_parser("solve", help="run an exact solver or a local policy")
    s.add_argument("instance", nargs="?")
    s.add_argument("--in", dest="instance_flag")
    s.add_argument("--solver", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--trace", action="store_true", help="emit the full per-step trace")
    s.add_argument("--format", choices=["json"], default="json")
    s.set_defaults(fn=cmd_solve)

    b = sub.add_parser("bench", help="run the planning benchmark")
    b.add_argument("--config")
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int)
    b.add_argument("--workers", type=int)
    b.add_argument("--format", choices=["csv", "svg"], default="csv")
    b.set_defaults(fn=cmd_bench)

    le = sub.add_parser("learn", help="train options on a maze and evaluate policies")
    le.add_argument("--maze")
    le.add_argument("--config")
    le.add_argument("--out")
    le.add_argument("--seed", type=int, default=0)
    le.add_argument("--eval-seeds", type=int, default=5)
    le.add_argument("--final-only", action="store_true")
    le.add_argument("--workers", type=int)
    le.add_argument("--format", choices=["csv"], default="csv")
    le.set_defaults(fn=cmd_learn)

    pl = sub.add_parser("plot", help="SVG of a benchmark CSV or of one tour")
    pl.add_argument("--in", dest="inp")
    pl.add_argument("--metric", choices=["mean", "worst", "ratio"], default="mean")
    pl.add_argument("--instance")
    pl.add_argument("--policy", default="NN")
    pl.add_argument("-k", type=int, default=8)
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--out")
    pl.add_argument("--format", choices=["svg"], default="svg")
    pl.set_defaults(fn=cmd_plot)
    return p


def _fail(code, kind, message, **extra):
    print(json.dumps({"error": kind, "message": message, **extra}, default=str), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "solve":
        args.instance = args.instance or args.instance_flag
        if not args.instance:
            return _fail(EXIT_USAGE, "usage", "solve needs an instance path")
    try:
        args.fn(args)
    except UsageError as e:
        return _fail(EXIT_USAGE, "usage", str(e))
    except GuardError as e:
        return _fail(EXIT_USAGE, "guard", str(e), guard=e.guard, limit=e.limit, value=e.value)
    except ValidationError as e:
        return _fail(EXIT_DATA, "validation", str(e), violations=e.violations)
    except FileNotFoundError as e:
        return _fail(EXIT_USAGE, "usage", str(e))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
