"""Coded real trees, finite pointed metric spaces and Gromov-Hausdorff distance."""
from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse.csgraph import shortest_path

from ._random import make_rng
from .errors import ValidationError
from .labels import GridFunction, SnakePath
from .treekit import PlaneTree

TOL = 1e-9
GH_EXACT_LIMIT = 100


class SparseTable:
    """Range minimum over a fixed vector: O(N log N) build, O(1) query."""

    def __init__(self, values):
        v = np.asarray(values)
        self.size = v.size
        levels = [v]
        span = 1
        while 2 * span <= v.size:
            prev = levels[-1]
            levels.append(np.minimum(prev[:-span], prev[span:]))
            span *= 2
        self.levels = levels

    def query(self, i, j):
        """min(values[i..j]) inclusive; scalars or broadcastable arrays."""
        i = np.asarray(i)
        j = np.asarray(j)
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        if (lo < 0).any() or (hi >= self.size).any():
            raise IndexError("range outside the table")
        k = np.floor(np.log2(hi - lo + 1)).astype(np.int64)
        if k.ndim == 0:
            k = int(k)
            out = min(self.levels[k][lo], self.levels[k][hi - (1 << k) + 1])
            return out
        out = np.empty(np.broadcast(lo, hi).shape, dtype=self.levels[0].dtype)
        lo, hi = np.broadcast_arrays(lo, hi)
        for level in np.unique(k):
            sel = k == level
            tab = self.levels[level]
            out[sel] = np.minimum(tab[lo[sel]], tab[hi[sel] - (1 << level) + 1])
        return out


def _rmq(g: GridFunction) -> SparseTable:
    cache = g.__dict__.setdefault("_rmq_cache", {})
    if "rmq" not in cache:
        cache["rmq"] = SparseTable(g.values)
    return cache["rmq"]


def mg(g: GridFunction, s: float, t: float) -> float:
    return float(_rmq(g).query(g.index(s), g.index(t)))


def dg(g: GridFunction, s: float, t: float) -> float:
    i, j = g.index(s), g.index(t)
    return float(g.values[i] + g.values[j] - 2 * _rmq(g).query(i, j))


def dg_index(g: GridFunction, i, j):
    """Vectorized d_g over grid indices."""
    return g.values[i] + g.values[j] - 2 * _rmq(g).query(i, j)


def four_point_violation(d: np.ndarray) -> float:
    """Largest amount by which the four-point condition fails (<= 0 when it holds).

    Of the three pair sums d(a,b)+d(c,e), d(a,c)+d(b,e), d(a,e)+d(b,c) the
    two largest must agree.
    """
    d = np.asarray(d)
    worst = 0.0
    for a in range(d.shape[0]):
        s1 = d[a][:, None, None] + d[None, :, :]
        s2 = d[a][None, :, None] + d[:, None, :]
        s3 = d[a][None, None, :] + d[:, :, None]
        sums = np.sort(np.stack([s1, s2, s3]), axis=0)
        worst = max(worst, float((sums[2] - sums[1]).max()))
    return worst


@dataclass(frozen=True, eq=False)
class CodedTree:
    """Quotient of a grid by d_g = 0, classes represented by their smallest index."""

    source: GridFunction
    class_of: np.ndarray
    representatives: np.ndarray

    @property
    def size(self) -> int:
        return self.representatives.size

    @property
    def root(self) -> int:
        return int(self.class_of[0])

    def distance(self, a: int, b: int) -> float:
        i, j = self.representatives[a], self.representatives[b]
        return float(dg_index(self.source, i, j))

    @cached_property
    def matrix(self) -> np.ndarray:
        r = self.representatives
        return dg_index(self.source, r[:, None], r[None, :])

    def as_space(self) -> "FiniteMetricSpace":
        return FiniteMetricSpace(self.matrix, self.root)


def quotient(g: GridFunction) -> CodedTree:
    """Identify grid times at d_g-distance zero.

    Consecutive members of a class are i < j with g(j) = g(i) and g > g(i)
    strictly in between, i.e. j is the next index with g(j) <= g(i); a
    monotone stack finds these links in one sweep.
    """
    v = g.values
    if not (v > 0).any():
        raise ValidationError("coding function is identically zero")
    parent = list(range(v.size))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    stack: list[int] = []
    for j, val in enumerate(v.tolist()):
        while stack and v[stack[-1]] >= val:
            i = stack.pop()
            if v[i] == val:
                a, b = find(i), find(j)
                parent[max(a, b)] = min(a, b)
        stack.append(j)
    roots = np.array([find(x) for x in range(v.size)])
    reps, class_of = np.unique(roots, return_inverse=True)
    return CodedTree(g, class_of.reshape(-1), reps)


def reroot_g(g: GridFunction, s0: int) -> GridFunction:
    """Coding function of the same tree seen from grid index ``s0``."""
    N = g.N
    if not 0 <= s0 <= N:
        raise IndexError(f"grid index {s0} outside [0, {N}]")
    shifted = (s0 + np.arange(N + 1)) % N if N else np.zeros(1, dtype=np.int64)
    vals = dg_index(g, np.full(N + 1, s0), shifted)
    vals[0] = vals[-1] = 0.0
    return GridFunction(vals, g.meta)


def segment(ct: CodedTree, s: int, t: int) -> set[int]:
    """Classes on the geodesic between the classes of grid indices s and t."""
    g = ct.source
    N = g.N
    if not (0 <= s <= N and 0 <= t <= N):
        raise IndexError("grid index out of range")
    rmq = _rmq(g)
    r = np.arange(N + 1)
    v = g.values
    floor = rmq.query(s, t)
    on_s = np.isclose(v, rmq.query(r, np.full(N + 1, s)), atol=TOL, rtol=0) & (v >= floor - TOL)
    on_t = np.isclose(v, rmq.query(r, np.full(N + 1, t)), atol=TOL, rtol=0) & (v >= floor - TOL)
    return set(np.unique(ct.class_of[on_s | on_t]).tolist())


class FiniteMetricSpace:
    """Pointed finite metric space given by its distance matrix."""

    def __init__(self, dist, base: int = 0, check: bool = True):
        d = np.array(dist, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
            raise ValidationError("distance matrix must be square and non-empty")
        if not 0 <= base < d.shape[0]:
            raise ValidationError("base point out of range")
        d.setflags(write=False)
        self.dist = d
        self.base = int(base)
        if check:
            problem = self.axiom_violation()
            if problem:
                raise ValidationError(problem)

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    def diameter(self) -> float:
        return float(self.dist.max())

    def axiom_violation(self, tol: float = TOL) -> str | None:
        d = self.dist
        if (d < -tol).any():
            return "negative distance"
        if np.abs(d - d.T).max() > tol:
            return "matrix is not symmetric"
        if np.abs(np.diag(d)).max() > tol:
            return "non-zero diagonal"
        off = d + np.eye(self.size) * 1.0
        if (off <= tol).any():
            return "distinct points at distance zero"
        tri = d[:, :, None] + d[None, :, :] - d[:, None, :]
        if tri.min() < -tol:
            return "triangle inequality fails"
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"base,{self.base}\n")
        for row in self.dist.tolist():
            buf.write(",".join(repr(float(x)) for x in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FiniteMetricSpace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        key, base = lines[0].split(",")
        if key != "base":
            raise ValidationError("first CSV line must be 'base,<index>'")
        rows = [[float(x) for x in ln.split(",")] for ln in lines[1:]]
        return cls(rows, int(base))


def tree_space(tree: PlaneTree, scale: float = 1.0) -> FiniteMetricSpace:
    """Vertices of a plane tree with graph distance times ``scale``, based at the root."""
    n = tree.num_vertices
    depth = np.asarray(tree.depth)
    anc = [[v] for v in range(n)]
    for v in range(1, n):
        anc[v] = anc[tree.parent[v]] + [v]
    d = np.zeros((n, n))
    for u in range(n):
        su = set(anc[u])
        for v in range(u + 1, n):
            lca = max(w for w in anc[v] if w in su)
            d[u, v] = d[v, u] = depth[u] + depth[v] - 2 * depth[lca]
    return FiniteMetricSpace(d * scale, 0)


@dataclass(frozen=True)
class Correspondence:
    pairs: frozenset

    def __init__(self, pairs):
        object.__setattr__(self, "pairs", frozenset((int(a), int(b)) for a, b in pairs))

    def check_covers(self, na: int, nb: int) -> None:
        left = {a for a, _ in self.pairs}
        right = {b for _, b in self.pairs}
        if left != set(range(na)) or right != set(range(nb)):
            raise ValidationError("correspondence does not cover both spaces")


def distortion(r: Correspondence, A: FiniteMetricSpace, B: FiniteMetricSpace) -> float:
    r.check_covers(A.size, B.size)
    p = np.array(sorted(r.pairs))
    da = A.dist[np.ix_(p[:, 0], p[:, 0])]
    db = B.dist[np.ix_(p[:, 1], p[:, 1])]
    return float(np.abs(da - db).max())


def _feasible(A: FiniteMetricSpace, B: FiniteMetricSpace, delta: float) -> list | None:
    """A covering correspondence containing the base pair with distortion <= delta.

    Backtracking over uncovered points, most constrained first; a candidate
    pair survives only if it is compatible with every pair chosen so far.
    """
    na, nb = A.size, B.size
    da, db = A.dist, B.dist
    # ok[a, b, a2, b2]: pairs (a, b) and (a2, b2) may coexist
    ok = np.abs(da[:, None, :, None] - db[None, :, None, :]) <= delta + TOL
    self_ok = ok[np.arange(na)[:, None], np.arange(nb)[None, :],
                 np.arange(na)[:, None], np.arange(nb)[None, :]]
    root = (A.base, B.base)
    if not self_ok[root]:
        return None
    allowed = ok[root[0], root[1]] & self_ok

    def search(chosen, allowed, cov_a, cov_b):
        if all(cov_a) and all(cov_b):
            return chosen
        best = None
        for a in range(na):
            if not cov_a[a]:
                opts = np.flatnonzero(allowed[a])
                if best is None or opts.size < best[2].size:
                    best = (0, a, opts)
        for b in range(nb):
            if not cov_b[b]:
                opts = np.flatnonzero(allowed[:, b])
                if best is None or opts.size < best[2].size:
                    best = (1, b, opts)
        side, x, opts = best
        if opts.size == 0:
            return None
        for y in opts.tolist():
            a, b = (x, y) if side == 0 else (y, x)
            ca, cb = list(cov_a), list(cov_b)
            ca[a] = cb[b] = True
            found = search(chosen + [(a, b)], allowed & ok[a, b], ca, cb)
            if found is not None:
                return found
        return None

    cov_a = [False] * na
    cov_b = [False] * nb
    cov_a[root[0]] = cov_b[root[1]] = True
    return search([root], allowed, cov_a, cov_b)


def _bounds(A: FiniteMetricSpace, B: FiniteMetricSpace) -> tuple[float, float, Correspondence]:
    ra, rb = A.dist[A.base], B.dist[B.base]
    gap = np.abs(ra[:, None] - rb[None, :])
    haus = max(gap.min(axis=1).max(), gap.min(axis=0).max())
    lower = max(abs(A.diameter() - B.diameter()), haus) / 2
    pairs = {(A.base, B.base)}
    pairs |= {(a, int(gap[a].argmin())) for a in range(A.size)}
    pairs |= {(int(gap[:, b].argmin()), b) for b in range(B.size)}
    r = Correspondence(pairs)
    return lower, distortion(r, A, B) / 2, r


def gh_exact(A: FiniteMetricSpace, B: FiniteMetricSpace, limit: int = GH_EXACT_LIMIT):
    """Pointed Gromov-Hausdorff distance: half the least distortion of a
    correspondence that pairs the base points.

    Exact when |A||B| <= ``limit``: the optimum is one of the finitely many
    values |d_A - d_B|, found by bisection over them with an exact
    feasibility search. Larger inputs get a certified (lower, upper) pair.
    """
    lower, upper, _ = _bounds(A, B)
    if A.size * B.size > limit:
        return (lower, upper)
    cand = np.unique(np.abs(A.dist[:, :, None, None] - B.dist[None, None, :, :]))
    cand = cand[(cand >= 2 * lower - TOL) & (cand <= 2 * upper + TOL)]
    lo, hi = 0, cand.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(A, B, float(cand[mid])) is not None:
            hi = mid
        else:
            lo = mid + 1
    return float(cand[lo]) / 2


def gh_witness(A: FiniteMetricSpace, B: FiniteMetricSpace) -> Correspondence:
    value = gh_exact(A, B)
    if isinstance(value, tuple):
        raise ValidationError("spaces too large for an exact witness")
    return Correspondence(_feasible(A, B, 2 * value))


def gh_coded_bound(g: GridFunction, h: GridFunction) -> tuple[float, Correspondence]:
    """2 sup|g - h| and the shared-time correspondence between the two quotients."""
    if g.N != h.N:
        raise ValidationError("grid functions live on different grids")
    qa, qb = quotient(g), quotient(h)
    pairs = set(zip(qa.class_of.tolist(), qb.class_of.tolist()))
    return 2 * float(np.abs(g.values - h.values).max()), Correspondence(pairs)


def refine(g: GridFunction, factor: int = 2) -> GridFunction:
    """Linear interpolation of a lattice excursion on a grid ``factor`` times finer."""
    N = g.N
    fine = np.interp(np.arange(N * factor + 1) / factor, np.arange(N + 1), g.values)
    meta = dict(g.meta)
    if "h" in meta:
        meta["h"] = meta["h"] / factor
    return GridFunction(fine, meta)


def contour_correspondence(tree: PlaneTree, factor: int = 2):
    """Tree vertices against the quotient of the refined rescaled contour.

    Fine time s is paired with the vertex v_{floor(2k s)} visited at the
    start of its contour step.
    """
    k = tree.size_edges
    scale = (2 * k) ** -0.5
    coarse = GridFunction(np.array(tree.contour_heights) * scale, {"h": scale})
    ct = quotient(refine(coarse, factor))
    cv = tree.contour_vertices
    pairs = {(cv[min(i // factor, 2 * k - 1)], int(ct.class_of[i])) for i in range(ct.class_of.size)}
    pairs.add((cv[-1], int(ct.class_of[-1])))
    return tree_space(tree, scale), ct.as_space(), Correspondence(pairs)


def D0_index(z: np.ndarray, i: int, j: int, rmq: SparseTable | None = None) -> float:
    z = np.asarray(z)
    N = z.size - 1
    if not (0 <= i <= N and 0 <= j <= N):
        raise IndexError("grid index out of range")
    rmq = rmq or SparseTable(z)
    lo, hi = min(i, j), max(i, j)
    inner = rmq.query(lo, hi)
    outer = min(rmq.query(hi, N), rmq.query(0, lo))
    return float(z[i] + z[j] - 2 * max(inner, outer))


def D0_grid(z: SnakePath, s: float, t: float) -> float:
    """Z_s + Z_t - 2 max(min over [s, t], min over the complementary arc)."""
    g = z.base
    cache = z.__dict__.setdefault("_rmq_cache", {})
    if "rmq" not in cache:
        cache["rmq"] = SparseTable(z.z)
    return D0_index(z.z, g.index(s), g.index(t), cache["rmq"])


def random_spaces(size: int, count: int, seed) -> list[FiniteMetricSpace]:
    """Random pointed spaces: shortest-path metrics of complete weighted graphs."""
    rng = make_rng(seed)
    out = []
    for _ in range(count):
        w = np.triu(rng.uniform(0.1, 2.0, size=(size, size)), 1)
        d = shortest_path(w + w.T, directed=False)
        out.append(FiniteMetricSpace(d, int(rng.integers(size))))
    return out
