"""Command line front end: sample, verify, experiment, convert.

Exit codes: 0 success, 1 runtime or I/O failure (including failed
verdicts), 2 usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import __version__, stats
from ._random import make_rng
from .cvs import (
    check_distance_identity,
    count_quadrangulations,
    cvs_forward,
    cvs_inverse,
    distance_bound_matrices,
    quadrangulation_formula,
)
from .errors import BoundExceeded, ValidationError
from .labels import (
    LabeledTree,
    count_labeled_trees,
    enumerate_labeled_trees,
    format_labeled_tree,
    parse_labeled_tree,
    rescaled_pair,
    sample_uniform_labeled_tree,
)
from .maps import all_pairs_distances, read_qmap, to_dot, write_qmap
from .metric import gh_exact, random_spaces
from .treekit import catalan, enumerate_trees, format_tree, parse_tree, sample_uniform_tree

USAGE, FAILURE = 2, 1


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything that determines a report; ``workers`` and ``out`` do not."""

    command: str
    name: str = ""
    n: int | None = None
    k: int | None = None
    samples: int | None = None
    seed: int = 0
    thresholds: dict[str, float] = field(default_factory=dict)
    params: dict[str, Any] = field(default_factory=dict)
    out: str | None = None
    workers: int = 1
    strict: bool = False

    def embedded(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("out")
        d.pop("workers")
        return d


def write_atomic(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- sample


def cmd_sample(args) -> int:
    size = args.faces if args.kind == "quad" else args.edges
    if size is None:
        size = args.faces if args.faces is not None else args.edges
    if size is None or size < 0:
        raise UsageError("need a non-negative --edges (tree, ltree) or --faces (quad)")
    rng = make_rng(args.seed)
    if args.kind == "tree":
        text = format_tree(sample_uniform_tree(size, rng))
    elif args.kind == "ltree":
        text = format_labeled_tree(sample_uniform_labeled_tree(size, rng))
    else:
        if size < 1:
            raise UsageError("a quadrangulation needs --faces >= 1")
        lt = sample_uniform_labeled_tree(size, rng)
        eps = int(rng.choice([-1, 1]))
        text = write_qmap(cvs_forward(lt, eps))
    write_atomic(args.out, text)
    return 0


# ---------------------------------------------------------------- verify


def _verify_counts(max_n: int) -> dict[str, bool]:
    out = {}
    for k in range(0, min(max_n, 8) + 1):
        out[f"trees_k={k}"] = len(enumerate_trees(k)) == catalan(k)
    for k in range(0, min(max_n, 6) + 1):
        out[f"labeled_k={k}"] = len(enumerate_labeled_trees(k)) == count_labeled_trees(k)
    for n in range(1, min(max_n, 6) + 1):
        out[f"quads_n={n}"] = count_quadrangulations(n) == quadrangulation_formula(n)
    return out


def _verify_roundtrip(max_n: int) -> dict[str, bool]:
    out = {}
    for n in range(1, max_n + 1):
        ok = True
        for lt in enumerate_labeled_trees(n, bound=5):
            for eps in (-1, 1):
                back, e = cvs_inverse(cvs_forward(lt, eps))
                ok &= back == lt and e == eps
        out[f"n={n}"] = ok
    return out


def _verify_identity(max_n: int) -> dict[str, bool]:
    out = {}
    for n in range(1, max_n + 1):
        out[f"n={n}"] = all(
            check_distance_identity(cvs_forward(lt, eps), lt).ok
            for lt in enumerate_labeled_trees(n, bound=5) for eps in (-1, 1)
        )
    return out


def _verify_bounds(n: int, samples: int, seed: int) -> dict[str, bool]:
    rng = make_rng(seed)
    ok = True
    for _ in range(samples):
        lt = sample_uniform_labeled_tree(n, rng)
        q = cvs_forward(lt, 1)
        d = all_pairs_distances(q)[: n + 1, : n + 1]
        lower, upper = distance_bound_matrices(lt)
        ok &= bool((lower <= d).all() and (d <= upper).all())
    return {f"n={n}": ok}


def _verify_gh(size: int, samples: int, seed: int) -> dict[str, bool]:
    spaces = random_spaces(size, 3 * samples, seed)
    tol = 1e-9
    sym = tri = zero = True
    for i in range(samples):
        a, b, c = spaces[3 * i : 3 * i + 3]
        ab, ba = gh_exact(a, b), gh_exact(b, a)
        sym &= abs(ab - ba) <= tol
        zero &= gh_exact(a, a) <= tol
        tri &= ab <= gh_exact(a, c) + gh_exact(c, b) + tol
    return {"symmetry": sym, "identity": zero, "triangle": tri}


def cmd_verify(args) -> int:
    target = args.target
    if target in ("counts", "cvs-roundtrip", "distance-identity"):
        limit = {"counts": 6, "cvs-roundtrip": 5, "distance-identity": 5}[target]
        if args.max_n < 0 or args.max_n > limit:
            raise UsageError(f"--max-n must lie in [0, {limit}] for {target}")
        fn = {"counts": _verify_counts, "cvs-roundtrip": _verify_roundtrip,
              "distance-identity": _verify_identity}[target]
        results = fn(args.max_n)
        params = {"max_n": args.max_n}
    elif target == "bounds":
        results = _verify_bounds(args.n, args.samples, args.seed)
        params = {"n": args.n, "samples": args.samples, "seed": args.seed}
    else:
        if not 1 <= args.size <= 4:
            raise UsageError("--size must lie in [1, 4]")
        results = _verify_gh(args.size, args.samples, args.seed)
        params = {"size": args.size, "samples": args.samples, "seed": args.seed}
    doc = {"verify": target, "version": __version__, "params": params,
           "results": results, "passed": all(results.values())}
    write_atomic(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0 if doc["passed"] else FAILURE


# ---------------------------------------------------------------- experiment

# size field, its default, default sample count, thresholds and extra parameters
EXPERIMENTS: dict[str, dict[str, Any]] = {
    "marginal-density": {"size": "k", "default": 5000, "samples": None,
                         "thresholds": {"tolerance": 0.05},
                         "params": {"t": 0.5, "xs": [0.5, 1.0, 1.5]}},
    "height-cdf": {"size": "k", "default": 2000, "samples": 100_000,
                   "thresholds": {"tolerance": 0.02}, "params": {"xs": [0.5, 1.0, 1.5]}},
    "radius-profile": {"size": "n", "default": 10_000, "samples": 2000,
                       "thresholds": {}, "params": {}},
    "radius-scaling": {"size": "n", "default": 10_000, "samples": 2000,
                       "thresholds": {"tolerance": 0.05}, "params": {"n_large": 40_000}},
    "two-point": {"size": "n", "default": 10_000, "samples": 10_000,
                  "thresholds": {"tolerance": 0.05}, "params": {}},
    "occupation-profile": {"size": "n", "default": 10_000, "samples": 2000,
                           "thresholds": {"tolerance": 0.05}, "params": {"bins": 20}},
    "dimension": {"size": "n", "default": 1_000_000, "samples": 20,
                  "thresholds": {"low": 3.5, "high": 4.5}, "params": {}},
}


def build_config(args) -> RunConfig:
    if args.name not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {args.name!r}; choose from {sorted(EXPERIMENTS)}")
    entry = EXPERIMENTS[args.name]
    base: dict[str, Any] = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except OSError as err:
            raise UsageError(f"cannot read config: {err}") from None
        except json.JSONDecodeError as err:
            raise UsageError(f"config is not valid JSON: {err}") from None
        if not isinstance(base, dict):
            raise UsageError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(RunConfig)}
        extra = set(base) - known
        if extra:
            raise UsageError(f"unknown config keys {sorted(extra)}")
    cfg = RunConfig(command="experiment", name=args.name)
    size = entry["size"]
    setattr(cfg, size, entry["default"])
    cfg.samples = entry["samples"]
    cfg.thresholds = dict(entry["thresholds"])
    cfg.params = dict(entry["params"])
    for key, val in base.items():
        if key in ("thresholds", "params"):
            getattr(cfg, key).update(val)
        elif key != "command":
            setattr(cfg, key, val)
    size_flag = args.faces if size == "n" else args.edges
    if size_flag is not None:
        setattr(cfg, size, size_flag)
    for key in ("samples", "seed", "workers", "out"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    if args.strict:
        cfg.strict = True
    if getattr(cfg, size) is None or getattr(cfg, size) < 1:
        raise UsageError(f"experiment {args.name} needs a positive size")
    if cfg.samples is not None and cfg.samples < 2:
        raise UsageError("need at least two samples")
    return cfg


def run_experiment(cfg: RunConfig) -> stats.ExperimentReport:
    p, th = cfg.params, cfg.thresholds
    common = {"seed": cfg.seed, "workers": cfg.workers}
    strict = {"strict": cfg.strict}
    if cfg.name == "marginal-density":
        rep = stats.marginal_density_check(cfg.k, p["t"], p["xs"], **th)
    elif cfg.name == "height-cdf":
        rep = stats.height_cdf_experiment(cfg.k, cfg.samples, p["xs"], **th, **common)
    elif cfg.name == "radius-profile":
        rep = stats.radius_profile_experiment(cfg.n, cfg.samples, **common, **strict)
    elif cfg.name == "radius-scaling":
        rep = stats.radius_scaling_check(cfg.n, p["n_large"], cfg.samples, **th, **common,
                                         **strict)
    elif cfg.name == "two-point":
        rep = stats.two_point_experiment(cfg.n, cfg.samples, **th, **common, **strict)
    elif cfg.name == "occupation-profile":
        rep = stats.snake_occupation_vs_profile(cfg.n, cfg.samples, p["bins"], **th, **common,
                                                **strict)
    else:
        rep = stats.dimension_estimate(cfg.n, cfg.samples, **th, **common)
    rep.params["config"] = cfg.embedded()
    return rep


def cmd_experiment(args) -> int:
    cfg = build_config(args)
    rep = run_experiment(cfg)
    out = Path(cfg.out or ".")
    write_atomic(str(out / f"{cfg.name}.csv"), rep.to_csv())
    write_atomic(str(out / f"{cfg.name}.json"), rep.to_json())
    status = "PASS" if rep.passed else "FAIL"
    print(f"{cfg.name}: {status} -> {out / cfg.name}.{{csv,json}}")
    return 0 if rep.passed else FAILURE


# ---------------------------------------------------------------- convert


def _map_csv(q) -> str:
    rows = ["halfedge,sigma,alpha,vertex,face,is_root,is_pointed_vertex"]
    for h in range(q.half_edge_count):
        v = int(q.vertex_of[h])
        rows.append(f"{h},{int(q.sigma[h])},{int(q.alpha[h])},{v},{int(q.face_of[h])},"
                    f"{int(h == q.root)},{int(q.pointed is not None and v == q.pointed)}")
    return "\n".join(rows) + "\n"


def _contour_csv(lt) -> str:
    c, v = rescaled_pair(lt)
    rows = ["t,height,label,rescaled_height,rescaled_label"]
    for i, t in enumerate(c.times):
        rows.append(f"{float(t)!r},{lt.tree.contour_heights[i]},{int(lt.label_contour[i])},"
                    f"{float(c.values[i])!r},{float(v.values[i])!r}")
    return "\n".join(rows) + "\n"


def cmd_convert(args) -> int:
    try:
        text = Path(args.input).read_text()
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return FAILURE
    head = text.split(None, 1)[0] if text.strip() else ""
    if head == "qmap":
        q = read_qmap(text)
        if args.to == "qmap":
            out = write_qmap(q)
        elif args.to == "dot":
            print("note: DOT keeps the graph only; it cannot be converted back", file=sys.stderr)
            out = to_dot(q)
        else:
            out = _map_csv(q)
    elif head in ("ltree", "tree"):
        if head == "tree":
            tree = parse_tree(text)
            lt = LabeledTree.from_increments(tree, [0] * tree.size_edges)
        else:
            lt = parse_labeled_tree(text)
        if args.to == "csv":
            out = _contour_csv(lt) if lt.k else "t,height,label\n0.0,0,0\n"
        else:
            if lt.k < 1:
                raise UsageError("the empty tree has no quadrangulation")
            q = cvs_forward(lt, args.eps)
            out = write_qmap(q) if args.to == "qmap" else to_dot(q)
    else:
        raise UsageError("input must be a qmap, ltree or tree file")
    write_atomic(args.out, out)
    return 0


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="planarlab", description="Random trees and quadrangulations.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sample", help="sample a tree, labeled tree or quadrangulation")
    s.add_argument("kind", choices=["tree", "ltree", "quad"])
    s.add_argument("--edges", type=int)
    s.add_argument("--faces", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    v = sub.add_parser("verify", help="run an exhaustive or randomized check suite")
    v.add_argument("target", choices=["counts", "cvs-roundtrip", "distance-identity",
                                      "bounds", "gh"])
    v.add_argument("--max-n", type=int, default=4)
    v.add_argument("--n", type=int, default=100)
    v.add_argument("--size", type=int, default=4)
    v.add_argument("--samples", type=int, default=20)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    e.add_argument("name")
    e.add_argument("--faces", type=int, help="map size n")
    e.add_argument("--edges", type=int, help="tree size k")
    e.add_argument("--samples", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--workers", type=int)
    e.add_argument("--strict", action="store_true", help="validate every sampled map")
    e.add_argument("--config", help="JSON file with RunConfig fields")
    e.add_argument("--out", help="output directory (default: current)")
    e.set_defaults(func=cmd_experiment)

    c = sub.add_parser("convert", help="convert between file formats")
    c.add_argument("input")
    c.add_argument("--to", choices=["qmap", "dot", "csv"], required=True)
    c.add_argument("--eps", type=int, choices=[-1, 1], default=1)
    c.add_argument("--out")
    c.set_defaults(func=cmd_convert)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return USAGE
    except (ValidationError, BoundExceeded) as err:
        print(f"error: {err}", file=sys.stderr)
        return USAGE
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return FAILURE
    except Exception as err:  # noqa: BLE001
        print(f"error: {err}", file=sys.stderr)
        return FAILURE


if __name__ == "__main__":
    sys.exit(main())
