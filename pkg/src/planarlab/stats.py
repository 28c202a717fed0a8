"""Density helpers and the Monte Carlo experiments on uniform quadrangulations.

Every experiment splits its samples into fixed-size blocks, each with its
own child seed spawned from the run seed, and reduces block results in
block order. Output therefore depends on (parameters, seed) only, never on
the number of worker processes.

Distances to the distinguished vertex are read off the labels:
d(v, v_*) = l(v) - min l + 1. Maps are only built for validation.
"""
from __future__ import annotations

import io
import json
import math
from fractions import Fraction
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Sequence

import numpy as np
from scipy.stats import ks_2samp

from . import __version__
from ._random import block_seeds, make_rng
from .cvs import check_distance_identity, cvs_forward, successors
from .labels import LabeledTree, sample_label_contours
from .maps import bfs_distances, is_bipartite, validate
from .treekit import PlaneTree, catalan, uniform_dyck_batch, vertex_ids
from .walks import WalkOracle, brownian_density

CHUNG_TERM_FLOOR = 1e-15
# The snake grid is finer than the map: at k = n its own discretization
# bias on sup Z is comparable to the +1 in the label distance formula.
SNAKE_REFINEMENT = 10
EXACT_HEIGHT_LIMIT = 20_000


def q_density(t: float, x: float) -> float:
    """First-passage density x / sqrt(2 pi t^3) exp(-x^2 / 2t)."""
    return x / math.sqrt(2 * math.pi * t**3) * math.exp(-x * x / (2 * t))


def p_density(t: float, x: float, y: float) -> float:
    return brownian_density(t, x, y)


def p_killed(t: float, x: float, y: float) -> float:
    """Transition density of Brownian motion killed at 0."""
    return p_density(t, x, y) - p_density(t, x, -y)


def chung_tail(x: float) -> float:
    """P(sup of the normalized excursion > x).

    For x >= 1 the series 2 sum (4k^2x^2 - 1) exp(-2k^2x^2); below 1 its
    theta-transformed twin 1 - sqrt(2 pi) pi^2 x^-3 sum k^2 exp(-pi^2k^2/2x^2),
    which converges fast there and avoids cancellation near 1. Terms are
    summed with ``math.fsum`` until they drop below 1e-15 past their peak.
    """
    if x <= 0:
        return 1.0
    terms = []
    k = 1
    if x < 1:
        while True:
            a = (math.pi * k) ** 2 / (2 * x * x)
            term = k * k * math.exp(-a)
            terms.append(term)
            if a > 2 and term < CHUNG_TERM_FLOOR:
                break
            k += 1
        return 1.0 - math.sqrt(2 * math.pi) * math.pi**2 * math.fsum(terms) / x**3
    while True:
        a = 2 * k * k * x * x
        term = (2 * a - 1) * math.exp(-a)
        terms.append(term)
        if a > 1 and abs(term) < CHUNG_TERM_FLOOR:
            break
        k += 1
    return min(1.0, max(0.0, 2 * math.fsum(terms)))


def excursion_marginal_limit(t: float, x: float) -> float:
    return 4 * math.sqrt(2 * math.pi) * q_density(t, x) * q_density(1 - t, x)


@dataclass
class ExperimentReport:
    name: str
    params: dict[str, Any]
    summary: dict[str, Any] = field(default_factory=dict)
    verdicts: dict[str, bool] = field(default_factory=dict)
    columns: list[str] = field(default_factory=list)
    rows: list[list[Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_json(self) -> str:
        doc = {
            "experiment": self.name,
            "version": __version__,
            "params": self.params,
            "summary": self.summary,
            "verdicts": self.verdicts,
            "passed": self.passed,
        }
        return json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_cell(v) for v in row) + "\n")
        return buf.getvalue()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(repr(float(obj))) if math.isfinite(obj) else str(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def run_blocks(fn: Callable, seed: int, blocks: int, workers: int = 1) -> list:
    """Evaluate ``fn(child_seed, block_index)`` for each block, results in block order."""
    seeds = block_seeds(seed, blocks)
    if workers <= 1 or blocks <= 1:
        return [fn(s, b) for b, s in enumerate(seeds)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds, range(blocks)))


def _block_sizes(total: int, block: int) -> list[int]:
    full, rest = divmod(total, block)
    return [block] * full + ([rest] if rest else [])


def _sized(fn: Callable, sizes: list[int]) -> Callable:
    return partial(_call_sized, fn, sizes)


def _call_sized(fn, sizes, seed, b):
    return fn(seed, sizes[b])


# ---------------------------------------------------------------- exact checks


def marginal_density_check(k: int, t: float, xs: Sequence[float],
                           tolerance: float = 0.05) -> ExperimentReport:
    """Conditioned walk marginal at time 2kt against the limiting excursion density."""
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    oracle = WalkOracle()
    i = round(2 * k * t)
    report = ExperimentReport(
        "marginal-density", {"k": k, "t": t, "xs": list(xs), "tolerance": tolerance},
        columns=["x", "discrete", "limit", "relative_gap"],
    )
    gaps = []
    for x in xs:
        level = math.floor(x * math.sqrt(2 * k))
        pair = sum(float(oracle.conditioned_marginal(k, i, j)) for j in (level, level + 1))
        disc = math.sqrt(2 * k) * pair
        lim = excursion_marginal_limit(t, x)
        gap = abs(disc - lim) / lim
        gaps.append(gap)
        report.rows.append([x, disc, lim, gap])
        report.verdicts[f"x={x}"] = gap <= tolerance
    report.summary["max_relative_gap"] = max(gaps)
    return report


# ---------------------------------------------------------------- height law


def exact_height_tail(k: int, x: float) -> float:
    """P(H / sqrt(2k) > x) for a uniform tree with k edges, exactly.

    Counts Dyck paths confined below the threshold by dynamic programming
    over heights with Python integers.
    """
    h = math.floor(x * math.sqrt(2 * k))
    if h < 0:
        return 1.0
    if h >= k:
        return 0.0
    cur = [1] + [0] * h
    for _ in range(2 * k):
        nxt = [0] * (h + 1)
        for j, c in enumerate(cur):
            if c:
                if j < h:
                    nxt[j + 1] += c
                if j:
                    nxt[j - 1] += c
        cur = nxt
    return float(1 - Fraction(cur[0], catalan(k)))


def _height_block(k: int, seed, size: int) -> np.ndarray:
    return uniform_dyck_batch(k, size, seed).max(axis=1)


def height_cdf_experiment(k: int, samples: int, xs: Sequence[float], seed: int,
                          tolerance: float = 0.02, block: int = 500,
                          workers: int = 1) -> ExperimentReport:
    """Tail of H / sqrt(2k) for uniform trees against the theta-series tail."""
    sizes = _block_sizes(samples, block)
    heights = np.concatenate(
        run_blocks(_sized(partial(_height_block, k), sizes), seed, len(sizes), workers)
    )
    scaled = heights / math.sqrt(2 * k)
    report = ExperimentReport(
        "height-cdf",
        {"k": k, "samples": samples, "xs": list(xs), "seed": seed, "tolerance": tolerance,
         "block": block},
        columns=["x", "empirical_tail", "stderr", "chung_tail", "abs_gap", "exact_tail_k"],
    )
    for x in xs:
        emp = float((scaled > x).mean())
        ref = chung_tail(x)
        se = math.sqrt(max(emp * (1 - emp), 1e-300) / samples)
        exact = exact_height_tail(k, x) if k <= EXACT_HEIGHT_LIMIT else float("nan")
        report.rows.append([x, emp, se, ref, abs(emp - ref), exact])
        report.verdicts[f"x={x}"] = abs(emp - ref) <= tolerance
    report.summary["max_abs_gap"] = max(r[4] for r in report.rows)
    # the gap between the finite-k law and the limit, free of sampling noise
    report.summary["max_finite_k_bias"] = max(abs(r[5] - r[3]) for r in report.rows)
    return report


# ---------------------------------------------------------------- labels and maps


def scale_factor(n: int) -> float:
    return (9 / (8 * n)) ** 0.25


def vertex_labels(heights: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-row vertex labels in first-visit order from contour arrays."""
    up = heights[:, 1:] > heights[:, :-1]
    out = np.empty((heights.shape[0], up.sum(axis=1)[0] + 1), dtype=np.int64)
    out[:, 0] = labels[:, 0]
    out[:, 1:] = labels[:, 1:][up].reshape(heights.shape[0], -1)
    return out


def build_sample(heights: np.ndarray, contour: np.ndarray) -> LabeledTree:
    tree = PlaneTree(heights.tolist())
    labels = np.empty(tree.num_vertices, dtype=np.int64)
    labels[list(tree.contour_vertices)] = contour
    return LabeledTree(tree, labels)


def check_sample(lt: LabeledTree, eps: int) -> dict[str, bool]:
    """Full structural and metric validation of one CVS sample."""
    n = lt.k
    q = cvs_forward(lt, eps)
    rep = validate(q)
    d = bfs_distances(q, q.pointed)
    return {
        "valid_map": rep.ok,
        "faces_degree_4": bool((q.face_degrees() == 4).all()),
        "vertex_count": rep.V == n + 2,
        "edge_count": rep.E == 2 * n,
        "bipartite": is_bipartite(q),
        "non_crossing": not successors(lt).chords_cross(),
        "distance_identity": check_distance_identity(q, lt).ok,
        "radius_identity": int(d.max()) == int(lt.labels.max() - lt.labels.min() + 1),
    }


def _validation_mask(rng: np.random.Generator, size: int, rate: float) -> np.ndarray:
    return rng.random(size) < rate


def label_profile(vlab: np.ndarray) -> np.ndarray:
    """Sphere sizes around v_* from one row of vertex labels (v_* itself at 0)."""
    return np.bincount(np.r_[0, vlab - vlab.min() + 1])


def _label_block(n: int, validate_rate: float, edges: np.ndarray | None, seed, size: int) -> dict:
    rng = make_rng(seed)
    heights, V = sample_label_contours(n, size, rng)
    eps = rng.choice(np.array([-1, 1]), size=size)
    vlab = vertex_labels(heights, V)
    lo = vlab.min(axis=1)
    hi = vlab.max(axis=1)
    # second vertex uniform among the n+2 vertices; index n+1 is v_* itself
    other = rng.integers(0, n + 2, size=size)
    picked = vlab[np.arange(size), np.minimum(other, n)]
    two_point = np.where(other == n + 1, 0, picked - lo + 1)
    out = {"radius": hi - lo + 1, "two_point": two_point, "checks": [], "hist": None,
           "profile_failures": 0}
    hist = np.zeros(0 if edges is None else edges.size - 1)
    scale = scale_factor(n)
    for row in vlab:
        prof = label_profile(row)
        out["profile_failures"] += int(prof.sum() != n + 2 or prof[0] != 1)
        if edges is not None:
            radii = np.arange(prof.size) * scale
            hist += np.bincount(_bin_index(radii, edges), weights=prof,
                                minlength=edges.size - 1) / (n + 2)
    if edges is not None:
        out["hist"] = hist
    for r in np.flatnonzero(_validation_mask(rng, size, validate_rate)):
        out["checks"].append(check_sample(build_sample(heights[r], V[r]), int(eps[r])))
    return out


def _bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    return np.clip(np.searchsorted(edges, values, side="right") - 1, 0, edges.size - 2)


def _binned(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Counts per bin; values past the last edge land in the last bin."""
    return np.bincount(_bin_index(values, edges), minlength=edges.size - 1).astype(np.float64)


def _label_runs(n: int, samples: int, seed: int, validate_rate: float, block: int,
                workers: int, edges: np.ndarray | None = None) -> dict:
    sizes = _block_sizes(samples, block)
    parts = run_blocks(
        _sized(partial(_label_block, n, validate_rate, edges), sizes), seed, len(sizes), workers
    )
    checks = [c for p in parts for c in p["checks"]]
    hist = None
    if edges is not None:
        hist = np.sum([p["hist"] for p in parts], axis=0) / samples
    return {
        "radius": np.concatenate([p["radius"] for p in parts]),
        "two_point": np.concatenate([p["two_point"] for p in parts]),
        "checks": checks,
        "hist": hist,
        "profile_failures": sum(p["profile_failures"] for p in parts),
    }


def _check_summary(report: ExperimentReport, runs: dict) -> None:
    checks = runs["checks"]
    report.summary["profile_identity_failures"] = runs["profile_failures"]
    report.verdicts["profile_identity"] = runs["profile_failures"] == 0
    report.summary["validated_samples"] = len(checks)
    for key in (checks[0] if checks else {}):
        report.summary[f"check_{key}"] = sum(c[key] for c in checks)
    report.verdicts["validation"] = all(all(c.values()) for c in checks)


def radius_profile_experiment(n: int, samples: int, seed: int, validate_rate: float = 0.01,
                              strict: bool = False, block: int = 64, workers: int = 1,
                              bins: int = 20, x_max: float = 4.0) -> ExperimentReport:
    """Rescaled radius from v_* and the averaged rescaled profile measure."""
    rate = 1.0 if strict else validate_rate
    edges = np.linspace(0.0, x_max, bins + 1)
    runs = _label_runs(n, samples, seed, rate, block, workers, edges)
    scaled = runs["radius"] * scale_factor(n)
    report = ExperimentReport(
        "radius-profile",
        {"n": n, "samples": samples, "seed": seed, "validate_rate": rate, "block": block,
         "bins": bins, "x_max": x_max},
        columns=["bin_left", "bin_right", "profile_mass"],
    )
    report.summary.update(
        mean_rescaled_radius=float(scaled.mean()),
        stderr_rescaled_radius=float(scaled.std(ddof=1) / math.sqrt(samples)),
        second_moment_rescaled_radius=float((scaled**2).mean()),
        profile_total_mass=float(runs["hist"].sum()),
    )
    for a, b, m in zip(edges[:-1], edges[1:], runs["hist"]):
        report.rows.append([a, b, m])
    _check_summary(report, runs)
    return report


def radius_scaling_check(n_small: int, n_large: int, samples: int, seed: int,
                         tolerance: float = 0.05, **kw) -> ExperimentReport:
    """Mean rescaled radius at two sizes should agree to within ``tolerance`` (relative)."""
    a = radius_profile_experiment(n_small, samples, seed, **kw)
    b = radius_profile_experiment(n_large, samples, seed + 1, **kw)
    ma = a.summary["mean_rescaled_radius"]
    mb = b.summary["mean_rescaled_radius"]
    rel = abs(ma - mb) / mb
    report = ExperimentReport(
        "radius-scaling",
        {"n_small": n_small, "n_large": n_large, "samples": samples, "seed": seed,
         "tolerance": tolerance},
        columns=["n", "mean_rescaled_radius", "stderr"],
        rows=[[n_small, ma, a.summary["stderr_rescaled_radius"]],
              [n_large, mb, b.summary["stderr_rescaled_radius"]]],
    )
    report.summary["relative_difference"] = rel
    report.verdicts["relative_difference"] = rel <= tolerance
    report.verdicts["validation"] = a.passed and b.passed
    return report


# ---------------------------------------------------------------- snake side


def _snake_block(k: int, edges: np.ndarray | None, seed, size: int) -> dict:
    """Snake over ``size`` independent discrete excursions with k up-steps."""
    rng = make_rng(seed)
    heights = uniform_dyck_batch(k, size, rng)
    h = (2 * k) ** -0.5
    xi = rng.standard_normal((size, k)) * math.sqrt(h)
    ids = vertex_ids(heights)
    up = heights[:, 1:] > heights[:, :-1]
    moving = np.where(up, ids[:, 1:], ids[:, :-1]) - 1
    step = np.take_along_axis(xi, moving, axis=1) * np.where(up, 1.0, -1.0)
    # value of each vertex: running sum read at the vertex's arrival
    vertex_z = np.zeros((size, k + 1))
    vertex_z[:, 1:] = np.cumsum(step, axis=1)[up].reshape(size, k)
    z = np.take_along_axis(vertex_z, ids, axis=1)
    out = {"sup": z.max(axis=1), "hist": None}
    if edges is not None:
        shifted = z[:, :-1] - z.min(axis=1, keepdims=True)
        hist = np.zeros(edges.size - 1)
        for row in shifted:
            hist += _binned(row, edges) / row.size
        out["hist"] = hist
    return out


def snake_samples(k: int, samples: int, seed: int, block: int = 64, workers: int = 1,
                  edges: np.ndarray | None = None) -> dict:
    sizes = _block_sizes(samples, block)
    parts = run_blocks(_sized(partial(_snake_block, k, edges), sizes), seed, len(sizes), workers)
    hist = None if edges is None else np.sum([p["hist"] for p in parts], axis=0) / samples
    return {"sup": np.concatenate([p["sup"] for p in parts]), "hist": hist}


def two_point_experiment(n: int, samples: int, seed: int, snake_samples_count: int | None = None,
                         snake_k: int | None = None, tolerance: float = 0.05,
                         validate_rate: float = 0.01, strict: bool = False,
                         bfs_checks: int = 100, block: int = 64,
                         workers: int = 1) -> ExperimentReport:
    """Rescaled distance between v_* and a uniform vertex against sup Z (two-sample KS)."""
    rate = 1.0 if strict else validate_rate
    runs = _label_runs(n, samples, seed, rate, block, workers)
    dist = runs["two_point"] * scale_factor(n)
    m = snake_samples_count or samples
    sk = snake_k or SNAKE_REFINEMENT * n
    sup = snake_samples(sk, m, seed + 7919, block, workers)["sup"]
    ks = ks_2samp(dist, sup)
    report = ExperimentReport(
        "two-point",
        {"n": n, "samples": samples, "snake_samples": m, "snake_k": sk, "seed": seed,
         "tolerance": tolerance, "validate_rate": rate, "bfs_checks": bfs_checks, "block": block},
        columns=["quantile", "rescaled_distance", "sup_z"],
    )
    for qtl in np.linspace(0.05, 0.95, 19):
        report.rows.append([float(qtl), float(np.quantile(dist, qtl)), float(np.quantile(sup, qtl))])
    report.summary.update(
        ks_statistic=float(ks.statistic), ks_pvalue=float(ks.pvalue),
        mean_rescaled_distance=float(dist.mean()), mean_sup_z=float(sup.mean()),
        min_positive=bool((dist[runs["two_point"] > 0] > 0).all()),
    )
    report.verdicts["ks"] = ks.statistic <= tolerance
    report.verdicts["bfs_cross_check"] = _two_point_bfs(n, bfs_checks, seed + 104729)
    _check_summary(report, runs)
    return report


def _two_point_bfs(n: int, count: int, seed: int) -> bool:
    """BFS distance between v_* and a random vertex equals the label formula."""
    rng = make_rng(seed)
    for _ in range(count):
        heights, V = sample_label_contours(n, 1, rng)
        lt = build_sample(heights[0], V[0])
        q = cvs_forward(lt, 1)
        v = int(rng.integers(0, n + 2))
        got = int(bfs_distances(q, q.pointed)[v])
        want = 0 if v == n + 1 else int(lt.labels[v] - lt.labels.min() + 1)
        if got != want:
            return False
    return True


def snake_occupation_vs_profile(n: int, samples: int, bins: int, seed: int,
                                snake_k: int | None = None, x_max: float = 4.0,
                                tolerance: float = 0.05, validate_rate: float = 0.01,
                                strict: bool = False, block: int = 64,
                                workers: int = 1) -> ExperimentReport:
    """Averaged rescaled profile against the occupation measure of Z - inf Z."""
    rate = 1.0 if strict else validate_rate
    edges = np.linspace(0.0, x_max, bins + 1)
    runs = _label_runs(n, samples, seed, rate, block, workers, edges)
    sk = snake_k or SNAKE_REFINEMENT * n
    snake = snake_samples(sk, samples, seed + 7919, block, workers, edges)
    p, q = runs["hist"], snake["hist"]
    tv = 0.5 * float(np.abs(p - q).sum())
    report = ExperimentReport(
        "occupation-profile",
        {"n": n, "samples": samples, "bins": bins, "seed": seed, "snake_k": sk,
         "x_max": x_max, "tolerance": tolerance, "validate_rate": rate, "block": block},
        columns=["bin_left", "bin_right", "profile_mass", "occupation_mass"],
    )
    for a, b, x, y in zip(edges[:-1], edges[1:], p, q):
        report.rows.append([a, b, x, y])
    report.summary.update(total_variation=tv, profile_mass=float(p.sum()),
                          occupation_mass=float(q.sum()))
    report.verdicts["total_variation"] = tv <= tolerance
    _check_summary(report, runs)
    return report


# ---------------------------------------------------------------- volume growth


def growth_slope(profile: np.ndarray, r_lo: float, r_hi: float,
                 scale: float = 1.0) -> tuple[float, float]:
    """Least-squares slope (and its standard error) of log |B(r)| against log r.

    ``profile[r]`` counts vertices at distance r; radii are multiplied by
    ``scale`` before taking logs, which shifts but never tilts the fit.
    """
    ball = np.cumsum(profile)
    r = np.arange(ball.size)
    keep = (r >= r_lo) & (r <= r_hi) & (r > 0)
    x = np.log(r[keep] * scale)
    y = np.log(ball[keep])
    if x.size < 3:
        raise ValueError("need at least three radii in the fitting window")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    dof = x.size - 2
    sigma2 = float(res[0]) / dof if res.size and dof > 0 else 0.0
    se = math.sqrt(sigma2 / float(((x - x.mean()) ** 2).sum()))
    return float(coef[0]), se


def growth_window(radius: float) -> tuple[float, float]:
    """The decade of radii centred geometrically in [1, radius]."""
    centre = math.sqrt(radius)
    return centre / math.sqrt(10), centre * math.sqrt(10)


def _profile_block(n: int, seed, size: int) -> np.ndarray:
    rng = make_rng(seed)
    heights, V = sample_label_contours(n, size, rng)
    vlab = vertex_labels(heights, V)
    return [label_profile(row) for row in vlab]


def dimension_estimate(n: int, samples: int, seed: int, window: tuple[float, float] | None = None,
                       low: float = 3.5, high: float = 4.5, workers: int = 1) -> ExperimentReport:
    """Volume-growth exponent of balls around v_*, averaged over samples."""
    profiles = [p for part in run_blocks(_sized(partial(_profile_block, n), [1] * samples),
                                         seed, samples, workers) for p in part]
    mean_radius = float(np.mean([p.size - 1 for p in profiles]))
    r_lo, r_hi = window or growth_window(mean_radius)
    width = max(p.size for p in profiles)
    mean_profile = np.zeros(width)
    slopes = []
    for p in profiles:
        mean_profile[: p.size] += p / samples
        slopes.append(growth_slope(p, r_lo, r_hi)[0])
    slope, se_fit = growth_slope(mean_profile, r_lo, r_hi)
    se = float(np.std(slopes, ddof=1) / math.sqrt(samples)) if samples > 1 else se_fit
    report = ExperimentReport(
        "dimension",
        {"n": n, "samples": samples, "seed": seed, "r_lo": r_lo, "r_hi": r_hi,
         "low": low, "high": high},
        columns=["r", "mean_ball_volume"],
    )
    ball = np.cumsum(mean_profile)
    for r in range(1, ball.size):
        report.rows.append([r, float(ball[r])])
    report.summary.update(slope=slope, stderr=se, per_sample_mean=float(np.mean(slopes)),
                          mean_radius=mean_radius)
    report.verdicts["slope_in_range"] = low <= slope <= high
    return report
