"""Rooted planar maps as half-edge rotation systems.

A map on half-edges 0..2E-1 is given by ``sigma`` (next half-edge
counterclockwise around the same origin) and ``alpha`` (reversal, by
default ``h ^ 1``). Faces are the orbits of ``phi = sigma^{-1} o alpha``:
``phi(h)`` is the half-edge that follows ``h`` along the face lying to its
left. The corner of ``h`` is the angular sector between ``h`` and
``sigma(h)``; it belongs to the face of ``h``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.int64)
    arr.setflags(write=False)
    return arr


def _cycle_ids(perm: np.ndarray) -> np.ndarray:
    """Cycle index per element, numbered by smallest member.

    Pointer doubling: after r rounds each element knows the minimum over
    the next 2^r elements of its cycle.
    """
    n = perm.size
    label = np.arange(n)
    p = np.asarray(perm)
    span = 1
    while span < n:
        label = np.minimum(label, label[p])
        p = p[p]
        span *= 2
    _, ids = np.unique(label, return_inverse=True)
    return ids.reshape(-1)


def _orbit_ids(perm: np.ndarray, *others: np.ndarray) -> np.ndarray:
    """Orbit index per element of the group generated by the permutations,
    numbered by first appearance in element order."""
    if not others:
        return _cycle_ids(perm)
    n = perm.size
    rows = np.concatenate([np.arange(n)] * (1 + len(others)))
    cols = np.concatenate([perm, *others])
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(n, n))
    _, raw = connected_components(graph, directed=True, connection="weak")
    _, first = np.unique(raw, return_index=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[raw]


def _connected(sigma: np.ndarray, alpha: np.ndarray) -> bool:
    if sigma.size <= 64:
        reached = {0}
        todo = [0]
        while todo:
            h = todo.pop()
            for g in (int(sigma[h]), int(alpha[h])):
                if g not in reached:
                    reached.add(g)
                    todo.append(g)
        return len(reached) == sigma.size
    return _orbit_ids(sigma, alpha).max() == 0


class RootedMap:
    """Immutable rooted (optionally pointed) map.

    ``vertex_of`` may pin an explicit vertex numbering; otherwise vertices are
    numbered by the first half-edge id leaving them.
    """

    def __init__(self, sigma, root: int = 0, pointed: int | None = None,
                 vertex_of=None, alpha=None):
        self.sigma = _frozen(sigma)
        n = self.sigma.size
        self.alpha = _frozen(np.arange(n) ^ 1 if alpha is None else alpha)
        self.root = int(root)
        self.pointed = None if pointed is None else int(pointed)
        self._vertex_of = None if vertex_of is None else _frozen(vertex_of)

    @property
    def half_edge_count(self) -> int:
        return self.sigma.size

    @property
    def num_edges(self) -> int:
        return self.sigma.size // 2

    @cached_property
    def sigma_inv(self) -> np.ndarray:
        inv = np.empty_like(self.sigma)
        inv[self.sigma] = np.arange(self.sigma.size)
        return inv

    @cached_property
    def phi(self) -> np.ndarray:
        return self.sigma_inv[self.alpha]

    @cached_property
    def vertex_of(self) -> np.ndarray:
        if self._vertex_of is not None:
            return self._vertex_of
        return _orbit_ids(self.sigma)

    @cached_property
    def face_of(self) -> np.ndarray:
        return _orbit_ids(self.phi)

    @property
    def num_vertices(self) -> int:
        return int(self.vertex_of.max()) + 1 if self.sigma.size else 1

    @property
    def num_faces(self) -> int:
        return int(self.face_of.max()) + 1 if self.sigma.size else 1

    def origin(self, h: int) -> int:
        return int(self.vertex_of[h])

    def target(self, h: int) -> int:
        return int(self.vertex_of[self.alpha[h]])

    def face_degrees(self) -> np.ndarray:
        return np.bincount(self.face_of)

    def vertex_degrees(self) -> np.ndarray:
        return np.bincount(self.vertex_of, minlength=self.num_vertices)

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR (indptr, neighbours) over vertices, one entry per half-edge."""
        src = self.vertex_of
        dst = self.vertex_of[self.alpha]
        order = np.argsort(src, kind="stable")
        indptr = np.zeros(self.num_vertices + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.num_vertices), out=indptr[1:])
        return indptr, dst[order]

    def __repr__(self):
        return (f"RootedMap(E={self.num_edges}, V={self.num_vertices}, "
                f"root={self.root}, pointed={self.pointed})")


def faces(m: RootedMap) -> list[tuple[int, ...]]:
    """Faces as cyclic half-edge sequences following ``phi``."""
    report = validate(m)
    if not report.ok:
        raise ValidationError(report.reason)
    phi = m.phi.tolist()
    seen = [False] * len(phi)
    out = []
    for h in range(len(phi)):
        if seen[h]:
            continue
        cycle = []
        g = h
        while not seen[g]:
            seen[g] = True
            cycle.append(g)
            g = phi[g]
        out.append(tuple(cycle))
    return out


@dataclass(frozen=True)
class MapReport:
    ok: bool
    reason: str | None
    V: int = 0
    E: int = 0
    F: int = 0

    def __bool__(self):
        return self.ok


def validate(m: RootedMap) -> MapReport:
    n = m.half_edge_count
    if n == 0 or n % 2:
        return MapReport(False, "half-edge count must be positive and even")
    idx = np.arange(n)
    for name, p in (("sigma", m.sigma), ("alpha", m.alpha)):
        if p.min() < 0 or p.max() >= n or np.unique(p).size != n:
            return MapReport(False, f"{name} is not a permutation")
    if (m.alpha == idx).any():
        return MapReport(False, "alpha has a fixed point")
    if (m.alpha[m.alpha] != idx).any():
        return MapReport(False, "alpha is not an involution")
    if not 0 <= m.root < n:
        return MapReport(False, "root outside half-edge range")
    if m._vertex_of is not None:
        vo = m._vertex_of
        if vo.shape != (n,) or (vo[m.sigma] != vo).any():
            return MapReport(False, "vertex_of is not constant on sigma orbits")
        if np.unique(vo).size != np.unique(_orbit_ids(m.sigma)).size:
            return MapReport(False, "vertex_of merges distinct vertices")
    if not _connected(m.sigma, m.alpha):
        return MapReport(False, "map is not connected")
    V, E, F = m.num_vertices, m.num_edges, m.num_faces
    if m.face_degrees().sum() != 2 * E:
        return MapReport(False, "face degrees do not sum to 2E", V, E, F)
    if V - E + F != 2:
        return MapReport(False, f"Euler characteristic {V - E + F} != 2", V, E, F)
    if m.pointed is not None and not 0 <= m.pointed < V:
        return MapReport(False, "pointed vertex out of range", V, E, F)
    return MapReport(True, None, V, E, F)


def bfs_distances(m: RootedMap, v: int) -> np.ndarray:
    """Graph distances from vertex ``v`` (int32), level-synchronous frontier."""
    nv = m.num_vertices
    if not 0 <= v < nv:
        raise IndexError(f"vertex {v} outside [0, {nv})")
    indptr, nbr = m.adjacency
    dist = np.full(nv, -1, dtype=np.int32)
    dist[v] = 0
    frontier = np.array([v], dtype=np.int64)
    level = 0
    while frontier.size:
        level += 1
        starts = indptr[frontier]
        lens = indptr[frontier + 1] - starts
        offs = np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(lens.sum())
        cand = nbr[offs]
        cand = np.unique(cand[dist[cand] < 0])
        dist[cand] = level
        frontier = cand
    return dist


def all_pairs_distances(m: RootedMap) -> np.ndarray:
    return np.stack([bfs_distances(m, v) for v in range(m.num_vertices)])


def radius(m: RootedMap, v: int) -> int:
    return int(bfs_distances(m, v).max())


def profile(m: RootedMap, v: int) -> np.ndarray:
    """Number of vertices at each distance 0..radius from ``v``."""
    return np.bincount(bfs_distances(m, v))


def is_bipartite(m: RootedMap) -> bool:
    d = bfs_distances(m, m.origin(m.root))
    return bool(((d[m.vertex_of] - d[m.vertex_of[m.alpha]]) % 2 == 1).all())


def canonical_order(m: RootedMap) -> np.ndarray:
    """Old half-edge id at each canonical position.

    Root-first sweep: positions are filled in pairs (h, alpha(h)) as each
    half-edge is first reached by ``sigma`` from an already placed one.
    """
    sigma = m.sigma.tolist()
    alpha = m.alpha.tolist()
    n = len(sigma)
    placed = [False] * n
    order = [m.root, alpha[m.root]]
    placed[m.root] = placed[alpha[m.root]] = True
    j = 0
    while j < len(order):
        g = sigma[order[j]]
        if not placed[g]:
            placed[g] = placed[alpha[g]] = True
            order.append(g)
            order.append(alpha[g])
        j += 1
    if len(order) != n:
        raise ValidationError("map is not connected")
    return np.array(order, dtype=np.int64)


def relabel(m: RootedMap, old_at: np.ndarray) -> RootedMap:
    """Same map with half-edge ``old_at[j]`` renamed ``j``.

    A pinned vertex numbering is carried across; otherwise the pointed
    vertex is translated into the new default numbering.
    """
    old_at = np.asarray(old_at, dtype=np.int64)
    new_of = np.empty_like(old_at)
    new_of[old_at] = np.arange(old_at.size)
    sigma = new_of[m.sigma[old_at]]
    alpha = new_of[m.alpha[old_at]]
    if np.array_equal(alpha, np.arange(alpha.size) ^ 1):
        alpha = None
    root = int(new_of[m.root])
    if m._vertex_of is not None:
        return RootedMap(sigma, root, m.pointed, m._vertex_of[old_at], alpha)
    pointed = None
    if m.pointed is not None:
        h = int(np.flatnonzero(m.vertex_of == m.pointed)[0])
        pointed = int(_orbit_ids(sigma)[new_of[h]])
    return RootedMap(sigma, root, pointed, None, alpha)


def canonical_form(m: RootedMap) -> RootedMap:
    """Relabelled copy in canonical order, default vertex numbering, XOR pairing."""
    unpinned = RootedMap(m.sigma, m.root, None, None, m.alpha)
    if m.pointed is not None:
        h = int(np.flatnonzero(m.vertex_of == m.pointed)[0])
        unpinned = RootedMap(m.sigma, m.root, int(unpinned.vertex_of[h]), None, m.alpha)
    return relabel(unpinned, canonical_order(unpinned))


def code_from_lists(sigma: list, alpha: list, root: int,
                    vertex_of: list | None = None, pointed: int | None = None) -> bytes:
    """Canonical code of an already validated map given as plain lists."""
    n = len(sigma)
    new = [-1] * n
    order = [root, alpha[root]]
    new[root], new[alpha[root]] = 0, 1
    j = 0
    while j < len(order):
        g = sigma[order[j]]
        if new[g] < 0:
            new[g] = len(order)
            new[alpha[g]] = len(order) + 1
            order.append(g)
            order.append(alpha[g])
        j += 1
    if len(order) != n:
        raise ValidationError("map is not connected")
    code = struct.pack(f"<{n + 1}I", n, *[new[sigma[h]] for h in order])
    if pointed is not None and vertex_of is not None:
        seen: dict[int, int] = {}
        for h in order:
            seen.setdefault(vertex_of[h], len(seen))
        code += b"P" + struct.pack("<I", seen[pointed])
    return code


def canonical_code(m: RootedMap, pointed: bool = True) -> bytes:
    """Byte string equal for two maps iff they are isomorphic as rooted maps
    (and, when ``pointed``, with the distinguished vertex matched too)."""
    report = validate(m)
    if not report.ok:
        raise ValidationError(report.reason)
    return code_from_lists(
        m.sigma.tolist(), m.alpha.tolist(), m.root,
        m.vertex_of.tolist() if pointed else None,
        m.pointed if pointed else None,
    )


def write_qmap(m: RootedMap) -> str:
    c = canonical_form(m)
    lines = ["qmap 1", f"halfedges {c.half_edge_count}", f"root {c.root}"]
    if c.pointed is not None:
        lines.append(f"pointed {c.pointed}")
    lines.extend(f"{h} {s}" for h, s in enumerate(c.sigma.tolist()))
    return "\n".join(lines) + "\n"


def read_qmap(text: str) -> RootedMap:
    lines = text.splitlines()
    try:
        if lines[0].strip() != "qmap 1":
            raise ValidationError("expected 'qmap 1' header")
        key, count = lines[1].split()
        if key != "halfedges":
            raise ValidationError("expected 'halfedges <2E>'")
        count = int(count)
        key, root = lines[2].split()
        if key != "root":
            raise ValidationError("expected 'root <h>'")
        pos, pointed = 3, None
        if lines[3].startswith("pointed"):
            pointed = int(lines[3].split()[1])
            pos = 4
        body = lines[pos : pos + count]
        if len(body) != count:
            raise ValidationError("truncated half-edge table")
        sigma = np.empty(count, dtype=np.int64)
        seen = np.zeros(count, dtype=bool)
        for line in body:
            h, s = map(int, line.split())
            sigma[h] = s
            seen[h] = True
    except (IndexError, ValueError) as err:
        if isinstance(err, ValidationError):
            raise
        raise ValidationError(f"malformed QMAP: {err}") from None
    if not seen.all():
        raise ValidationError("half-edge table has gaps")
    m = RootedMap(sigma, int(root), pointed)
    report = validate(m)
    if not report.ok:
        raise ValidationError(report.reason)
    return m


def to_dot(m: RootedMap) -> str:
    """Graph-only rendering; the embedding is not preserved."""
    lines = ["graph map {"]
    if m.pointed is not None:
        lines.append(f"  {m.pointed} [shape=doublecircle];")
    vo = m.vertex_of
    for h in range(0, m.half_edge_count):
        g = int(m.alpha[h])
        if h < g:
            attr = " [color=red]" if m.root in (h, g) else ""
            lines.append(f"  {vo[h]} -- {vo[g]}{attr};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def trivial_to_quad(m: RootedMap) -> RootedMap:
    """Quadrangulation with one white vertex per face of ``m``.

    The corner of half-edge h becomes the quadrangulation edge (2h, 2h+1):
    2h leaves the black vertex origin(h), 2h+1 leaves the white vertex of
    the face of h. The root is the edge of the corner following the root of
    ``m`` counterclockwise.
    """
    report = validate(m)
    if not report.ok:
        raise ValidationError(report.reason)
    n = m.half_edge_count
    sigma = np.empty(2 * n, dtype=np.int64)
    sigma[0::2] = 2 * m.sigma
    sigma[1::2] = 2 * m.phi + 1
    return RootedMap(sigma, 2 * m.root)


def trivial_from_quad(q: RootedMap) -> RootedMap:
    """Inverse of :func:`trivial_to_quad` up to half-edge relabelling."""
    report = validate(q)
    if not report.ok:
        raise ValidationError(report.reason)
    if (q.face_degrees() != 4).any():
        raise ValidationError("not a quadrangulation")
    d = bfs_distances(q, q.origin(q.root))
    black = np.flatnonzero(d[q.vertex_of] % 2 == 0)
    rank = np.full(q.half_edge_count, -1, dtype=np.int64)
    rank[black] = np.arange(black.size)
    # the diagonal sits just clockwise of each black half-edge g; its other
    # end sits at the opposite black corner of the same face
    step = q.alpha[q.sigma_inv]
    partner = step[step[black]]
    m = RootedMap(rank[q.sigma[black]], int(rank[q.root]), alpha=rank[partner])
    return canonical_form(m)
