"""Labeled trees to pointed quadrangulations and back.

Corners of a tree with n edges are the contour times 0..2n-1; corner i sits
at vertex v_i and carries the label V_i. The successor of a corner is the
next corner, in the cyclic contour order, whose label is one less; corners
carrying the minimal label have no successor and are joined to the extra
vertex v_* instead. One arc per corner gives the quadrangulation.

Half-edge 2i is the end of arc i at corner i, 2i+1 the end at its
successor (or at v_*). In vertex numberings, tree vertices keep their
first-visit index and v_* is vertex n+1.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BoundExceeded, ValidationError
from .labels import LabeledTree
from .maps import RootedMap, bfs_distances, code_from_lists, validate
from .treekit import PlaneTree, catalan, enumerate_trees

INF = -1
EXHAUSTIVE_QUAD_BOUND = 6


def successor_array(labels) -> list[int]:
    """Cyclic successors of a label sequence over corners 0..N-1 (INF if none).

    A stack of waiting corners per label: a corner with label L settles every
    corner waiting with label L+1. Two sweeps cover the wrap-around.
    """
    labels = list(labels)
    n = len(labels)
    succ = [INF] * n
    waiting: dict[int, list[int]] = {}
    for j in range(2 * n):
        lab = labels[j % n]
        for i in waiting.pop(lab + 1, ()):
            succ[i] = j % n
        if j < n:
            waiting.setdefault(lab, []).append(j)
    return succ


def chords_cross(succ) -> bool:
    """True iff two successor chords cross on the corner circle.

    v_* is placed right after the first corner without successor, as in
    the embedding. Chords sharing an endpoint never count as crossing.
    """
    if INF not in succ:
        raise ValidationError("some corner must lack a successor")
    first_min = succ.index(INF)

    def pos(c):
        return first_min + 1 if c == INF else (c + 1 if c > first_min else c)

    chords = sorted((min(pos(i), pos(s)), -max(pos(i), pos(s))) for i, s in enumerate(succ))
    stack: list[int] = []
    for a, neg_b in chords:
        b = -neg_b
        while stack and stack[-1] <= a:
            stack.pop()
        if stack and stack[-1] < b:
            return True
        stack.append(b)
    return False


@dataclass(frozen=True, eq=False)
class CorneredTree:
    labeled: LabeledTree

    def __post_init__(self):
        if self.labeled.k < 1:
            raise ValidationError("the construction needs at least one edge")

    @property
    def n(self) -> int:
        return self.labeled.k

    @cached_property
    def corner_vertex(self) -> np.ndarray:
        return np.asarray(self.labeled.tree.contour_vertices[:-1], dtype=np.int64)

    @cached_property
    def corner_label(self) -> np.ndarray:
        return self.labeled.label_contour[:-1]

    @cached_property
    def succ(self) -> np.ndarray:
        return np.asarray(successor_array(self.corner_label.tolist()), dtype=np.int64)

    @property
    def min_label(self) -> int:
        return int(self.labeled.labels.min())

    @property
    def pointed_label(self) -> int:
        return self.min_label - 1

    def chords_cross(self) -> bool:
        return chords_cross(self.succ.tolist())


def successors(lt: LabeledTree) -> CorneredTree:
    return CorneredTree(lt)


def _arc_rotation(corner_vertex: np.ndarray, succ: np.ndarray, n: int):
    """Rotation system and vertex map of the arcs.

    Corners are laid on a circle in contour order with v_* inserted right
    after the first corner of minimal label. Around a tree vertex,
    counterclockwise order visits its corners by decreasing contour time;
    inside one corner the arc ends are ordered by the counterclockwise
    circle distance to their other endpoint. Around v_* the arcs come in
    circle order starting after v_*.
    """
    m = 2 * n
    big = m + 1
    idx = np.arange(m)
    star = succ == INF
    first_min = int(np.flatnonzero(star)[0])
    cpos = np.where(idx > first_min, idx + 1, idx)
    star_pos = first_min + 1
    other = np.where(star, star_pos, cpos[np.where(star, 0, succ)])
    vert = np.empty(2 * m, dtype=np.int64)
    key1 = np.empty(2 * m, dtype=np.int64)
    key2 = np.empty(2 * m, dtype=np.int64)
    vert[0::2] = corner_vertex
    key1[0::2] = -idx
    key2[0::2] = (other - cpos) % big
    vert[1::2] = np.where(star, n + 1, corner_vertex[np.where(star, 0, succ)])
    key1[1::2] = np.where(star, (cpos - star_pos) % big, -np.where(star, 0, succ))
    key2[1::2] = np.where(star, 0, (cpos - other) % big)
    order = np.lexsort((key2, key1, vert))
    vs = vert[order]
    nxt = np.roll(order, -1)
    # close each vertex group into a cycle
    starts = np.flatnonzero(np.r_[True, vs[1:] != vs[:-1]])
    ends = np.r_[starts[1:], vs.size] - 1
    nxt[ends] = order[starts]
    sigma = np.empty(2 * m, dtype=np.int64)
    sigma[order] = nxt
    return sigma, vert


def _arc_rotation_small(corner_vertex: list, succ: list, n: int) -> tuple[list, list]:
    """Pure-Python twin of :func:`_arc_rotation` for small trees."""
    m = 2 * n
    big = m + 1
    first_min = succ.index(INF)
    star_pos = first_min + 1
    cpos = [i + 1 if i > first_min else i for i in range(m)]
    keyed = []
    vert = [0] * (2 * m)
    for i in range(m):
        s = succ[i]
        other = star_pos if s == INF else cpos[s]
        vert[2 * i] = corner_vertex[i]
        keyed.append((corner_vertex[i], -i, (other - cpos[i]) % big, 2 * i))
        if s == INF:
            vert[2 * i + 1] = n + 1
            keyed.append((n + 1, (cpos[i] - star_pos) % big, 0, 2 * i + 1))
        else:
            vert[2 * i + 1] = corner_vertex[s]
            keyed.append((corner_vertex[s], -s, (cpos[i] - other) % big, 2 * i + 1))
    keyed.sort()
    sigma = [0] * (2 * m)
    start = 0
    for j in range(len(keyed)):
        last = j + 1 == len(keyed) or keyed[j + 1][0] != keyed[j][0]
        sigma[keyed[j][3]] = keyed[start][3] if last else keyed[j + 1][3]
        if last:
            start = j + 1
    return sigma, vert


SMALL_TREE = 64


def cvs_forward(lt: LabeledTree, eps: int) -> RootedMap:
    """Pointed rooted quadrangulation with n faces coded by ``(lt, eps)``."""
    if eps not in (1, -1):
        raise ValidationError("eps must be +1 or -1")
    ct = CorneredTree(lt)
    if ct.n <= SMALL_TREE:
        sigma, vertex_of = _arc_rotation_small(ct.corner_vertex.tolist(), ct.succ.tolist(), ct.n)
    else:
        sigma, vertex_of = _arc_rotation(ct.corner_vertex, ct.succ, ct.n)
    # eps = +1: root arc runs from s(e_0) to e_0
    root = 1 if eps == 1 else 0
    return RootedMap(sigma, root, ct.n + 1, vertex_of)


def _tree_edge_corners(q: RootedMap, lab: np.ndarray, side: int) -> list[tuple[int, int]]:
    """For every face, the two q-corners (named by half-edge) joined by its tree edge.

    Face labels read (k, k+1, k, k+1) or (k, k+1, k+2, k+1). In the first
    case the tree edge is the diagonal between the two (k+1)-corners; in the
    second it doubles the face side from the (k+2)-corner to the
    neighbouring (k+1)-corner on side ``side``.
    """
    phi = q.phi
    vo = q.vertex_of
    seen = np.zeros(q.half_edge_count, dtype=bool)
    out = []
    for h0 in range(q.half_edge_count):
        if seen[h0]:
            continue
        hs = [h0]
        for _ in range(3):
            hs.append(int(phi[hs[-1]]))
        seen[hs] = True
        L = [int(lab[vo[h]]) for h in hs]
        top = max(L)
        j = L.index(top)
        if L[j] == L[(j + 2) % 4] and abs(L[j] - L[(j + 1) % 4]) == 1 and L[(j + 1) % 4] == L[(j + 3) % 4]:
            out.append((hs[j], hs[(j + 2) % 4]))
        elif (L[(j + 1) % 4] == L[(j - 1) % 4] == top - 1 and L[(j + 2) % 4] == top - 2):
            out.append((hs[j], hs[(j + side) % 4]))
        else:
            raise ValidationError(f"face with label pattern {L} is not admissible")
    return out


# fixed by exhaustive round-trip: the other side breaks bijectivity
SIMPLE_FACE_SIDE = -1


def cvs_inverse(q: RootedMap, side: int = SIMPLE_FACE_SIDE) -> tuple[LabeledTree, int]:
    """Labeled tree and sign whose forward image is ``q``."""
    report = validate(q)
    if not report.ok:
        raise ValidationError(report.reason)
    if (q.face_degrees() != 4).any():
        raise ValidationError("not a quadrangulation")
    if q.pointed is None:
        raise ValidationError("need a pointed quadrangulation")
    lab = bfs_distances(q, q.pointed).astype(np.int64)
    pairs = _tree_edge_corners(q, lab, side)
    n = len(pairs)
    # tree half-edges 2f, 2f+1 sit in the q-corners of the face-f pair
    tree_at = np.full(q.half_edge_count, -1, dtype=np.int64)
    for f, (a, b) in enumerate(pairs):
        if tree_at[a] >= 0 or tree_at[b] >= 0:
            raise ValidationError("two tree edges share a corner")
        tree_at[a], tree_at[b] = 2 * f, 2 * f + 1
    vo = q.vertex_of
    if (tree_at[vo == q.pointed] >= 0).any():
        raise ValidationError("tree edge at the distinguished vertex")
    # tree rotation: sweep sigma around each vertex, keeping corners with a tree edge
    sigma_t = np.empty(2 * n, dtype=np.int64)
    origin_t = np.empty(2 * n, dtype=np.int64)
    sigma = q.sigma.tolist()
    done = np.zeros(q.half_edge_count, dtype=bool)
    for h0 in range(q.half_edge_count):
        if done[h0]:
            continue
        cyc = [h0]
        while sigma[cyc[-1]] != h0:
            cyc.append(sigma[cyc[-1]])
        done[cyc] = True
        ts = [int(tree_at[h]) for h in cyc if tree_at[h] >= 0]
        for t, u in zip(ts, ts[1:] + ts[:1]):
            sigma_t[t] = u
            origin_t[t] = vo[h0]
    r = q.root
    lo, hi = lab[vo[r]], lab[vo[q.alpha[r]]]
    eps = 1 if lo < hi else -1
    a = int(q.alpha[r]) if eps == 1 else r
    h = int(q.sigma_inv[a])
    while tree_at[h] < 0:
        h = int(q.sigma_inv[h])
    e = int(tree_at[h])
    sigma_t_inv = np.empty_like(sigma_t)
    sigma_t_inv[sigma_t] = np.arange(2 * n)
    # contour: next half-edge along the single face of the tree
    heights = [0]
    order = [int(origin_t[e])]
    depth = {order[0]: 0}
    for _ in range(2 * n):
        w = int(origin_t[e ^ 1])
        if w not in depth:
            depth[w] = heights[-1] + 1
            order.append(w)
        heights.append(depth[w])
        e = int(sigma_t_inv[e ^ 1])
    if len(order) != n + 1 or heights[-1] != 0:
        raise ValidationError("recovered edges do not form a tree")
    labels = lab[order] - lab[order[0]]
    return LabeledTree(PlaneTree(heights), labels), eps


@dataclass(frozen=True)
class IdentityReport:
    ok: bool
    mismatches: int
    first_bad_vertex: int | None = None

    def __bool__(self):
        return self.ok


def check_distance_identity(q: RootedMap, lt: LabeledTree) -> IdentityReport:
    """One BFS from v_*: d(v, v_*) = l(v) - min l + 1 for every tree vertex."""
    d = bfs_distances(q, q.pointed).astype(np.int64)
    want = lt.labels - lt.labels.min() + 1
    got = d[: lt.tree.num_vertices]
    bad = np.flatnonzero(got != want)
    if d[q.pointed] != 0:
        return IdentityReport(False, bad.size + 1, int(q.pointed))
    return IdentityReport(bad.size == 0, int(bad.size), int(bad[0]) if bad.size else None)


def successor_chain_lengths(lt: LabeledTree) -> np.ndarray:
    """Length of the chain corner -> s(corner) -> ... -> v_*, per corner."""
    ct = CorneredTree(lt)
    return ct.corner_label - ct.pointed_label


def _cyclic_min_matrix(values: np.ndarray) -> np.ndarray:
    """M[i, j] = min of values over the cyclic interval from i to j."""
    m = values.size
    out = np.empty((m, m), dtype=values.dtype)
    for i in range(m):
        out[i] = np.roll(np.minimum.accumulate(np.roll(values, -i)), i)
    return out


def _segment_min(tree: PlaneTree, labels: np.ndarray, u: int) -> np.ndarray:
    """Minimal label on the tree path from u to every vertex."""
    out = np.empty(tree.num_vertices, dtype=np.int64)
    out[u] = labels[u]
    stack = [u]
    seen = {u}
    while stack:
        x = stack.pop()
        nbrs = list(tree.children[x])
        if tree.parent[x] >= 0:
            nbrs.append(tree.parent[x])
        for y in nbrs:
            if y not in seen:
                seen.add(y)
                out[y] = min(out[x], labels[y])
                stack.append(y)
    return out


def distance_bound_matrices(lt: LabeledTree) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs (lower, upper) bounds on d_q over tree vertices."""
    ct = CorneredTree(lt)
    lab = lt.labels
    nv = lt.tree.num_vertices
    M = _cyclic_min_matrix(ct.corner_label)
    # best corner pair: maximise the interval minimum
    by_row = np.full((nv, M.shape[1]), np.iinfo(np.int64).min)
    np.maximum.at(by_row, ct.corner_vertex, M)
    best = np.full((nv, nv), np.iinfo(np.int64).min)
    np.maximum.at(best.T, ct.corner_vertex, by_row.T)
    upper = lab[:, None] + lab[None, :] - 2 * best + 2
    seg = np.stack([_segment_min(lt.tree, lab, u) for u in range(nv)])
    lower = np.maximum(np.abs(lab[:, None] - lab[None, :]), lab[:, None] + lab[None, :] - 2 * seg)
    return lower, upper


def distance_bounds(q: RootedMap, lt: LabeledTree, u: int, v: int) -> tuple[int, int, int]:
    """(lower, upper, exact) for d_q(u, v) between two tree vertices."""
    nv = lt.tree.num_vertices
    if u == q.pointed or v == q.pointed or not (0 <= u < nv and 0 <= v < nv):
        raise ValidationError("bounds need two tree vertices (not v_*)")
    ct = CorneredTree(lt)
    lab = lt.labels
    V = ct.corner_label
    m = V.size
    cu = np.flatnonzero(ct.corner_vertex == u)
    cv = np.flatnonzero(ct.corner_vertex == v)
    best = max(
        int(V[np.arange(i, i + ((j - i) % m) + 1) % m].min()) for i in cu for j in cv
    )
    upper = int(lab[u] + lab[v] - 2 * best + 2)
    seg = _segment_min(lt.tree, lab, u)[v]
    lower = int(max(abs(lab[u] - lab[v]), lab[u] + lab[v] - 2 * seg))
    exact = int(bfs_distances(q, u)[v])
    return lower, upper, exact


def dn0(lt: LabeledTree, i: int, j: int) -> int:
    """Label upper bound on d_q(v_i, v_j) over contour times 0..2n."""
    V = lt.label_contour
    N = V.size - 1
    if not (0 <= i <= N and 0 <= j <= N):
        raise IndexError(f"contour index outside [0, {N}]")
    if i <= j:
        inner = V[i : j + 1].min()
        outer = min(V[j:].min(), V[: i + 1].min())
    else:
        inner = min(V[i:].min(), V[: j + 1].min())
        outer = V[j : i + 1].min()
    return int(V[i] + V[j] - 2 * max(inner, outer) + 2)


def dn0_matrix(lt: LabeledTree) -> np.ndarray:
    """:func:`dn0` for every pair of contour times at once."""
    V = np.asarray(lt.label_contour, dtype=np.int64)
    N = V.size - 1
    inner = np.empty((N + 1, N + 1), dtype=np.int64)
    for i in range(N + 1):
        inner[i, i:] = np.minimum.accumulate(V[i:])
    iu = np.triu_indices(N + 1)
    inner[iu[1], iu[0]] = inner[iu]
    lo = np.minimum.outer(np.arange(N + 1), np.arange(N + 1))
    hi = np.maximum.outer(np.arange(N + 1), np.arange(N + 1))
    prefix = np.minimum.accumulate(V)
    suffix = np.minimum.accumulate(V[::-1])[::-1]
    outer = np.minimum(prefix[lo], suffix[hi])
    return V[:, None] + V[None, :] - 2 * np.maximum(inner, outer) + 2


def contour_distances(q: RootedMap, lt: LabeledTree) -> np.ndarray:
    """d_n(i, j) = d_q(v_i, v_j) over contour times 0..2n."""
    cv = np.asarray(lt.tree.contour_vertices)
    dist = np.stack([bfs_distances(q, v) for v in range(lt.tree.num_vertices)])
    return dist[np.ix_(cv, cv)]


def _bilinear(table: np.ndarray, x: float, y: float) -> float:
    N = table.shape[0] - 1
    i, j = min(int(np.floor(x)), N - 1), min(int(np.floor(y)), N - 1)
    a, b = x - i, y - j
    return float(
        (1 - a) * (1 - b) * table[i, j] + (1 - a) * b * table[i, j + 1]
        + a * (1 - b) * table[i + 1, j] + a * b * table[i + 1, j + 1]
    )


def Dn_interpolated(lt: LabeledTree, s: float, t: float, q: RootedMap | None = None,
                    table: np.ndarray | None = None) -> float:
    """Rescaled bilinear interpolation of d_n at times (2ns, 2nt)."""
    if not (0 <= s <= 1 and 0 <= t <= 1):
        raise IndexError("times must lie in [0, 1]")
    n = lt.k
    if table is None:
        table = contour_distances(q if q is not None else cvs_forward(lt, 1), lt)
    return (9 / (8 * n)) ** 0.25 * _bilinear(table, 2 * n * s, 2 * n * t)


def pointed_codes(n: int, bound: int = EXHAUSTIVE_QUAD_BOUND) -> set[bytes]:
    """Pointed canonical codes of every CVS image of (labeled tree, sign) with n edges.

    Runs the list-based construction directly on enumerated label
    sequences; outputs are valid by construction (checked exhaustively in
    the test-suite for small n), so per-map validation is skipped.
    """
    if n > bound:
        raise BoundExceeded(f"n={n} exceeds exhaustive bound {bound}")
    if n < 1:
        raise ValidationError("need n >= 1")
    m = 2 * n
    xor = [h ^ 1 for h in range(2 * m)]
    codes = set()
    for tree in enumerate_trees(n, bound=max(n, 10)):
        cv = list(tree.contour_vertices[:-1])
        parent = tree.parent
        for inc in itertools.product((-1, 0, 1), repeat=n):
            lab = [0] * (n + 1)
            for v in range(1, n + 1):
                lab[v] = lab[parent[v]] + inc[v - 1]
            succ = successor_array([lab[v] for v in cv])
            sigma, vert = _arc_rotation_small(cv, succ, n)
            for root in (0, 1):
                codes.add(code_from_lists(sigma, xor, root, vert, n + 1))
    return codes


def count_quadrangulations(n: int, bound: int = EXHAUSTIVE_QUAD_BOUND) -> int:
    """Rooted quadrangulations with n faces: distinct pointed CVS images over n+2."""
    codes = pointed_codes(n, bound)
    if len(codes) % (n + 2):
        raise ValidationError("pointed count is not a multiple of n+2")
    return len(codes) // (n + 2)


def quadrangulation_formula(n: int) -> int:
    return 2 * 3**n * catalan(n) // (n + 2)
