"""Acceptance suite: the thirteen end-to-end criteria at their stated tolerances.

Each criterion records one PASS/FAIL line; the lines are printed in the
pytest terminal summary, or directly when this file is run as a script.
"""
from __future__ import annotations

import itertools
import json
import math
import subprocess
import sys
import time
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest

from planarlab.cvs import (
    contour_distances,
    count_quadrangulations,
    cvs_forward,
    cvs_inverse,
    distance_bound_matrices,
    dn0_matrix,
)
from planarlab.labels import (
    GridFunction,
    count_labeled_trees,
    enumerate_labeled_trees,
    sample_excursion,
    sample_label_contours,
    sample_snake_batch,
    sample_uniform_labeled_tree,
)
from planarlab.maps import all_pairs_distances
from planarlab.metric import (
    FiniteMetricSpace,
    contour_correspondence,
    dg_index,
    distortion,
    gh_coded_bound,
    gh_exact,
    quotient,
    random_spaces,
)
from planarlab.stats import (
    build_sample,
    check_sample,
    dimension_estimate,
    height_cdf_experiment,
    marginal_density_check,
    radius_scaling_check,
    snake_occupation_vs_profile,
    two_point_experiment,
)
from planarlab.treekit import catalan, enumerate_trees
from planarlab.walks import WalkOracle, kemperman

RESULTS: dict[int, str] = {}
SEED = 20240917


def record(number: int, title: str, ok: bool, detail: str) -> bool:
    RESULTS[number] = f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}: {detail}"
    return ok


# ---------------------------------------------------------------- 1


def criterion_counts() -> bool:
    trees = all(len(enumerate_trees(k)) == catalan(k) for k in range(9))
    frozen = [1, 1, 2, 5, 14, 42, 132, 429, 1430]
    trees &= [catalan(k) for k in range(9)] == frozen
    labeled = all(len(enumerate_labeled_trees(k)) == 3**k * catalan(k) == count_labeled_trees(k)
                  for k in range(7))
    quads = [count_quadrangulations(n) for n in range(1, 7)]
    formula = [2 * 3**n * catalan(n) // (n + 2) for n in range(1, 7)]
    ok = trees and labeled and quads == formula == [2, 9, 54, 378, 2916, 24057]
    return record(1, "exact counts", ok, f"trees={trees} labeled={labeled} quads={quads}")


# ---------------------------------------------------------------- 2-4


@lru_cache(maxsize=None)
def exhaustive_checks() -> dict:
    """Forward image of every (labeled tree, sign) for n <= 5, all checks at once."""
    out = {"roundtrip": 0, "structure": 0, "identity": 0, "total": 0}
    for n in range(1, 6):
        for lt in enumerate_labeled_trees(n):
            for eps in (-1, 1):
                q = cvs_forward(lt, eps)
                out["total"] += 1
                out["roundtrip"] += cvs_inverse(q) == (lt, eps)
                c = check_sample(lt, eps)
                out["identity"] += c.pop("distance_identity") and c.pop("radius_identity")
                out["structure"] += all(c.values())
    return out


@lru_cache(maxsize=None)
def random_checks(n: int, count: int) -> list[dict]:
    rng = np.random.default_rng(SEED + n)
    out = []
    for _ in range(count):
        heights, V = sample_label_contours(n, 1, rng)
        out.append(check_sample(build_sample(heights[0], V[0]), int(rng.choice([-1, 1]))))
    return out


def criterion_roundtrip() -> bool:
    ex = exhaustive_checks()
    rng = np.random.default_rng(SEED)
    good = 0
    for _ in range(1000):
        lt = sample_uniform_labeled_tree(1000, rng)
        eps = int(rng.choice([-1, 1]))
        good += cvs_inverse(cvs_forward(lt, eps)) == (lt, eps)
    ok = ex["roundtrip"] == ex["total"] and good == 1000
    return record(2, "bijection round trip", ok,
                  f"exhaustive {ex['roundtrip']}/{ex['total']}, random n=1000 {good}/1000")


def criterion_structure() -> bool:
    ex = exhaustive_checks()
    rand = random_checks(10_000, 100)
    keys = ["valid_map", "faces_degree_4", "vertex_count", "edge_count", "bipartite",
            "non_crossing"]
    good = sum(all(c[k] for k in keys) for c in rand)
    ok = ex["structure"] == ex["total"] and good == 100
    return record(3, "structural validation", ok,
                  f"exhaustive {ex['structure']}/{ex['total']}, random n=1e4 {good}/100")


def criterion_distance_identity() -> bool:
    ex = exhaustive_checks()
    good = sum(c["distance_identity"] and c["radius_identity"]
               for c in random_checks(10_000, 100))
    ok = ex["identity"] == ex["total"] and good == 100
    return record(4, "distance identity from v_*", ok,
                  f"exhaustive {ex['identity']}/{ex['total']}, random n=1e4 {good}/100")


# ---------------------------------------------------------------- 5


def criterion_sandwich() -> bool:
    rng = np.random.default_rng(SEED + 5)
    sandwich = 0
    for _ in range(50):
        lt = sample_uniform_labeled_tree(100, rng)
        q = cvs_forward(lt, int(rng.choice([-1, 1])))
        nv = lt.tree.num_vertices
        d = all_pairs_distances(q)[:nv, :nv]
        lower, upper = distance_bound_matrices(lt)
        sandwich += bool((lower <= d).all() and (d <= upper).all())
    contour = 0
    for _ in range(20):
        lt = sample_uniform_labeled_tree(200, rng)
        q = cvs_forward(lt, int(rng.choice([-1, 1])))
        contour += bool((contour_distances(q, lt) <= dn0_matrix(lt)).all())
    ok = sandwich == 50 and contour == 20
    return record(5, "distance sandwich", ok,
                  f"lower<=d<=upper {sandwich}/50 at n=100, d<=d0 {contour}/20 at n=200")


# ---------------------------------------------------------------- 6


def _brute_hitting(level: int, n: int) -> Fraction:
    hits = 0
    for steps in itertools.product((-1, 1), repeat=n):
        s = level
        for j, x in enumerate(steps, 1):
            s += x
            if s == -1:
                hits += j == n
                break
    return Fraction(hits, 2**n)


def criterion_walks() -> bool:
    hit = all(kemperman(l, n) == _brute_hitting(l, n) for n in range(1, 15) for l in range(6))
    oracle = WalkOracle()
    sums = all(
        sum(oracle.conditioned_marginal(k, i, l) for l in range(2 * k + 1)) == 1
        for k in range(1, 13) for i in range(1, 2 * k + 1)
    )
    return record(6, "walk oracle", hit and sums,
                  f"hitting law vs 2^n enumeration {hit}, marginals sum to 1 {sums}")


# ---------------------------------------------------------------- 7, 8


def criterion_marginal_density() -> bool:
    rep = marginal_density_check(5000, 0.5, [0.5, 1.0, 1.5], tolerance=0.05)
    gaps = ", ".join(f"x={r[0]}: {r[3]:.4f}" for r in rep.rows)
    return record(7, "marginal vs limit density (5%)", rep.passed, gaps)


def criterion_height() -> bool:
    rep = height_cdf_experiment(2000, 100_000, [0.5, 1.0, 1.5], seed=SEED, tolerance=0.02)
    gaps = ", ".join(f"x={r[0]}: {r[1]:.4f} vs limit {r[3]:.4f} (exact k=2000: {r[5]:.4f})"
                     for r in rep.rows)
    return record(8, "height tail (0.02)", rep.passed, gaps)


# ---------------------------------------------------------------- 9


def _random_grid(rng, n) -> GridFunction:
    v = np.zeros(n + 1)
    v[1:-1] = rng.uniform(0, 1, n - 1)
    return GridFunction(v)


def criterion_gh() -> bool:
    rng = np.random.default_rng(SEED + 9)
    tol = 1e-9
    metric_ok = True
    for _ in range(60):
        a, b, c = (random_spaces(int(rng.integers(1, 5)), 1, rng)[0] for _ in range(3))
        ab = gh_exact(a, b)
        metric_ok &= abs(ab - gh_exact(b, a)) <= tol and gh_exact(a, a) <= tol and ab >= -tol
        metric_ok &= ab <= gh_exact(a, c) + gh_exact(c, b) + tol
    two_ok = True
    for a, b in rng.uniform(0.1, 5, size=(30, 2)):
        A = FiniteMetricSpace([[0, a], [a, 0]])
        B = FiniteMetricSpace([[0, b], [b, 0]])
        two_ok &= abs(gh_exact(A, B) - abs(a - b) / 2) <= tol
    coded_ok = True
    for _ in range(100):
        n = int(rng.integers(3, 8))
        g, h = _random_grid(rng, n), _random_grid(rng, n)
        bound, _ = gh_coded_bound(g, h)
        coded_ok &= gh_exact(quotient(g).as_space(), quotient(h).as_space()) <= bound + tol
    contour_ok = True
    worst = 0.0
    for k in range(1, 5):
        for tree in enumerate_trees(k):
            T, Q, r = contour_correspondence(tree)
            dis = distortion(r, T, Q)
            worst = max(worst, dis / (2 * (2 * k) ** -0.5))
            contour_ok &= dis <= 2 * (2 * k) ** -0.5 + tol
    ok = metric_ok and two_ok and coded_ok and contour_ok
    return record(9, "Gromov-Hausdorff engine", ok,
                  f"metric {metric_ok}, two-point {two_ok}, coded bound {coded_ok}, "
                  f"contour distortion {contour_ok} (worst ratio {worst:.3f})")


# ---------------------------------------------------------------- 10


def criterion_snake() -> bool:
    e = sample_excursion(50, SEED)
    runs = 100_000
    z = sample_snake_batch(e, runs, SEED + 10)
    times = np.linspace(5, e.N - 5, 10).astype(int)
    sq = z[:, times] ** 2
    var_gap = np.abs(sq.mean(axis=0) - e.values[times]) / (sq.std(axis=0) / math.sqrt(runs))
    rng = np.random.default_rng(SEED)
    pairs = rng.integers(1, e.N, size=(10, 2))
    prod = z[:, pairs[:, 0]] * z[:, pairs[:, 1]]
    m = dg_index(e, pairs[:, 0], pairs[:, 1])
    cov_target = (e.values[pairs[:, 0]] + e.values[pairs[:, 1]] - m) / 2
    cov_gap = np.abs(prod.mean(axis=0) - cov_target) / (prod.std(axis=0) / math.sqrt(runs))
    i, j = np.meshgrid(np.arange(e.N + 1), np.arange(e.N + 1), indexing="ij")
    same = np.argwhere(np.isclose(dg_index(e, i, j), 0.0, atol=1e-12))
    exact = all(np.array_equal(z[:, a], z[:, b]) for a, b in same)
    ok = bool(var_gap.max() <= 3 and cov_gap.max() <= 3 and exact)
    return record(10, "snake covariance", ok,
                  f"max |var gap| {var_gap.max():.2f} SE, max |cov gap| {cov_gap.max():.2f} SE, "
                  f"identified times equal {exact} ({len(same)} pairs)")


# ---------------------------------------------------------------- 11


def criterion_map_statistics() -> bool:
    radius = radius_scaling_check(10_000, 40_000, 1000, SEED, tolerance=0.05, strict=True)
    two = two_point_experiment(10_000, 10_000, SEED + 1, tolerance=0.05)
    occ = snake_occupation_vs_profile(10_000, 2000, 20, SEED + 2, tolerance=0.05)
    ok = radius.passed and two.passed and occ.passed
    detail = (
        f"radius identity+validation {radius.verdicts['validation']}, "
        f"radius rel. diff {radius.summary['relative_difference']:.4f}, "
        f"KS {two.summary['ks_statistic']:.4f}, "
        f"occupation TV {occ.summary['total_variation']:.4f}"
    )
    return record(11, "quadrangulation limit statistics", ok, detail)


# ---------------------------------------------------------------- 12


def criterion_dimension() -> bool:
    rep = dimension_estimate(1_000_000, 20, SEED, low=3.5, high=4.5)
    s = rep.summary
    return record(12, "volume growth exponent in [3.5, 4.5]", rep.passed,
                  f"slope {s['slope']:.3f} +- {s['stderr']:.3f} over r in "
                  f"[{rep.params['r_lo']:.1f}, {rep.params['r_hi']:.1f}]")


# ---------------------------------------------------------------- 13


def _cli(*argv: str) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "planarlab", *argv], capture_output=True)


def criterion_reproducibility(tmp) -> bool:
    cfg = tmp / "cfg.json"
    cfg.write_text(json.dumps({"samples": 2000, "seed": 11}))
    outputs = []
    for workers in ("1", "3"):
        d = tmp / f"w{workers}"
        runs = [
            _cli("experiment", "height-cdf", "--edges", "500", "--config", str(cfg),
                 "--workers", workers, "--out", str(d)),
            _cli("experiment", "radius-profile", "--faces", "2000", "--samples", "200",
                 "--seed", "5", "--workers", workers, "--out", str(d)),
            _cli("sample", "quad", "--faces", "500", "--seed", "3", "--out", str(d / "q.qmap")),
            _cli("verify", "gh", "--size", "3", "--samples", "5", "--out", str(d / "gh.json")),
        ]
        files = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
        outputs.append((files, [r.returncode for r in runs]))
    same = outputs[0][0] == outputs[1][0] and len(outputs[0][0]) == 6
    codes_ok = outputs[0][1] == outputs[1][1]
    return record(13, "byte-identical reruns", same and codes_ok,
                  f"{len(outputs[0][0])} files identical across worker counts: {same}")


# ---------------------------------------------------------------- pytest entry points


def test_exact_counts():
    assert criterion_counts(), RESULTS[1]


def test_bijection_round_trip():
    assert criterion_roundtrip(), RESULTS[2]


def test_structural_validation():
    assert criterion_structure(), RESULTS[3]


def test_distance_identity():
    assert criterion_distance_identity(), RESULTS[4]


def test_distance_sandwich():
    assert criterion_sandwich(), RESULTS[5]


def test_walk_oracle():
    assert criterion_walks(), RESULTS[6]


def test_marginal_density():
    assert criterion_marginal_density(), RESULTS[7]


def test_height_law():
    assert criterion_height(), RESULTS[8]


def test_gh_engine():
    assert criterion_gh(), RESULTS[9]


def test_snake_sampler():
    assert criterion_snake(), RESULTS[10]


@pytest.mark.slow
def test_map_limit_statistics():
    assert criterion_map_statistics(), RESULTS[11]


@pytest.mark.slow
def test_dimension():
    assert criterion_dimension(), RESULTS[12]


def test_reproducibility(tmp_path):
    assert criterion_reproducibility(tmp_path), RESULTS[13]


def report_lines() -> list[str]:
    return [RESULTS[k] for k in sorted(RESULTS)]


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    checks = [criterion_counts, criterion_roundtrip, criterion_structure,
              criterion_distance_identity, criterion_sandwich, criterion_walks,
              criterion_marginal_density, criterion_height, criterion_gh, criterion_snake,
              criterion_map_statistics, criterion_dimension]
    for fn in checks:
        t0 = time.time()
        fn()
        number = max(RESULTS)
        print(RESULTS[number], f"({time.time() - t0:.0f}s)", flush=True)
    with tempfile.TemporaryDirectory() as tmp:
        criterion_reproducibility(Path(tmp))
    print(RESULTS[13], flush=True)
    sys.exit(0 if all(line.startswith("[PASS]") for line in report_lines()) else 1)
