"""Plane trees, Dyck paths and their samplers.

Vertices are numbered in first-visit (contour) order, so vertex 0 is the
root and every parent carries a smaller index than its children. The Dyck
path of a tree with ``k`` edges is the height sequence ``C(0), ..., C(2k)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import Iterator, Sequence

import numpy as np

from ._random import make_rng
from .errors import BoundExceeded, TreeTooLarge, ValidationError

EXHAUSTIVE_TREE_BOUND = 10


@dataclass(frozen=True)
class DyckPath:
    steps: tuple[int, ...]

    def __post_init__(self):
        x = self.steps
        if len(x) == 0 or len(x) % 2 == 0:
            raise ValidationError("a Dyck path has odd length 2k+1")
        if x[0] != 0 or x[-1] != 0:
            raise ValidationError("a Dyck path starts and ends at 0")
        for a, b in zip(x, x[1:]):
            if abs(a - b) != 1:
                raise ValidationError("Dyck path steps must be +1 or -1")
            if b < 0:
                raise ValidationError("Dyck path went negative")

    @property
    def k(self) -> int:
        return (len(self.steps) - 1) // 2

    @classmethod
    def from_word(cls, word: str) -> "DyckPath":
        h = [0]
        for c in word:
            if c == "U":
                h.append(h[-1] + 1)
            elif c == "D":
                h.append(h[-1] - 1)
            else:
                raise ValidationError(f"bad Dyck letter {c!r}")
        return cls(tuple(h))

    def word(self) -> str:
        x = self.steps
        return "".join("U" if b > a else "D" for a, b in zip(x, x[1:]))


class PlaneTree:
    """Rooted ordered tree coded by its contour.

    Immutable. Two trees compare equal iff their Dyck paths agree.
    """

    def __init__(self, heights: Sequence[int]):
        heights = tuple(int(h) for h in heights)
        parent = [-1]
        depth = [0]
        children: list[list[int]] = [[]]
        contour = [0]
        stack = [0]
        for a, b in zip(heights, heights[1:]):
            if b == a + 1:
                v = len(parent)
                u = stack[-1]
                parent.append(u)
                depth.append(b)
                children.append([])
                children[u].append(v)
                stack.append(v)
            else:
                stack.pop()
            contour.append(stack[-1])
        self.parent = tuple(parent)
        self.children = tuple(tuple(c) for c in children)
        self.contour_vertices = tuple(contour)
        self.contour_heights = heights

    @property
    def size_edges(self) -> int:
        return len(self.parent) - 1

    k = size_edges

    @property
    def num_vertices(self) -> int:
        return len(self.parent)

    @cached_property
    def depth(self) -> tuple[int, ...]:
        d = [0] * len(self.parent)
        for v in range(1, len(self.parent)):
            d[v] = d[self.parent[v]] + 1
        return tuple(d)

    def height(self) -> int:
        return max(self.contour_heights)

    def __eq__(self, other):
        if not isinstance(other, PlaneTree):
            return NotImplemented
        return self.contour_heights == other.contour_heights

    def __hash__(self):
        return hash(self.contour_heights)

    def __repr__(self):
        return f"PlaneTree({DyckPath(self.contour_heights).word() or 'empty'})"


def _check_heights(heights: Sequence[int]) -> None:
    DyckPath(tuple(int(h) for h in heights))


def tree_to_dyck(tree: PlaneTree) -> DyckPath:
    return DyckPath(tree.contour_heights)


def dyck_to_tree(path: DyckPath | Sequence[int]) -> PlaneTree:
    steps = path.steps if isinstance(path, DyckPath) else tuple(path)
    _check_heights(steps)
    return PlaneTree(steps)


def height(tree: PlaneTree) -> int:
    return tree.height()


def catalan(k: int) -> int:
    return comb(2 * k, k) // (k + 1)


def _dyck_paths(k: int) -> Iterator[tuple[int, ...]]:
    # D before U at every position gives ascending height sequences
    def rec(prefix, h, ups):
        if len(prefix) == 2 * k + 1:
            yield tuple(prefix)
            return
        remaining = 2 * k + 1 - len(prefix)
        if h > 0:
            prefix.append(h - 1)
            yield from rec(prefix, h - 1, ups)
            prefix.pop()
        if ups < k and h + 1 < remaining:
            prefix.append(h + 1)
            yield from rec(prefix, h + 1, ups + 1)
            prefix.pop()

    yield from rec([0], 0, 0)


def enumerate_trees(k: int, bound: int = EXHAUSTIVE_TREE_BOUND) -> list[PlaneTree]:
    """All plane trees with ``k`` edges, in lexicographic Dyck order."""
    if k > bound:
        raise BoundExceeded(f"enumerate_trees: k={k} exceeds exhaustive bound {bound}")
    return [PlaneTree(h) for h in _dyck_paths(k)]


def uniform_dyck_batch(k: int, count: int, seed) -> np.ndarray:
    """Heights of ``count`` independent uniform Dyck paths, shape (count, 2k+1).

    Cycle lemma: a uniform arrangement of k up-steps and k+1 down-steps is
    rotated to start right after the first minimum of its partial sums,
    which is the unique rotation that first hits -1 at time 2k+1.
    """
    rng = make_rng(seed)
    base = np.concatenate([np.ones(k, dtype=np.int8), -np.ones(k + 1, dtype=np.int8)])
    arr = rng.permuted(np.broadcast_to(base, (count, 2 * k + 1)), axis=1)
    walk = np.cumsum(arr, axis=1, dtype=np.int32)
    start = np.argmin(walk, axis=1) + 1
    idx = (start[:, None] + np.arange(2 * k + 1)[None, :]) % (2 * k + 1)
    rotated = np.take_along_axis(arr, idx, axis=1)[:, :-1]
    heights = np.zeros((count, 2 * k + 1), dtype=np.int32)
    np.cumsum(rotated, axis=1, out=heights[:, 1:])
    return heights


def first_visit_times(heights: np.ndarray) -> np.ndarray:
    """For each contour time i, the time at which vertex v_i was first reached.

    Works on a single path or a batch (last axis is time). Times at equal
    height are grouped by a stable sort; within a group the latest up-arrival
    is carried forward, with the height folded into the key so that the
    running maximum never leaks across groups.
    """
    x = np.asarray(heights)
    squeeze = x.ndim == 1
    x = np.atleast_2d(x).astype(np.int64)
    n = x.shape[1]
    arrival = np.ones_like(x, dtype=bool)
    arrival[:, 1:] = x[:, 1:] > x[:, :-1]
    order = np.argsort(x, axis=1, kind="stable")
    xs = np.take_along_axis(x, order, axis=1)
    arr_s = np.take_along_axis(arrival, order, axis=1)
    key = xs * (n + 1) + np.where(arr_s, order, -1)
    np.maximum.accumulate(key, axis=1, out=key)
    fv = np.empty_like(x)
    np.put_along_axis(fv, order, key - xs * (n + 1), axis=1)
    return fv[0] if squeeze else fv


def vertex_ids(heights: np.ndarray) -> np.ndarray:
    """First-visit vertex index of each contour time (vectorized ``contour_vertices``)."""
    x = np.atleast_2d(np.asarray(heights))
    ups = np.zeros(x.shape, dtype=np.int64)
    np.cumsum(x[:, 1:] > x[:, :-1], axis=1, out=ups[:, 1:])
    ids = np.take_along_axis(ups, np.atleast_2d(first_visit_times(x)), axis=1)
    return ids[0] if np.ndim(heights) == 1 else ids


def sample_uniform_tree(k: int, seed) -> PlaneTree:
    return PlaneTree(uniform_dyck_batch(k, 1, seed)[0].tolist())


def sample_gw_geometric(seed, max_edges: int | None = None) -> PlaneTree:
    """Galton-Watson tree with offspring law 2^{-j-1}.

    Its contour is a simple random walk run until it first hits -1. The
    size has infinite mean, so ``max_edges`` lets callers cap the work; an
    overflow raises :class:`TreeTooLarge`.
    """
    rng = make_rng(seed)
    pos = 0
    chunks = []
    chunk = 16
    while True:
        steps = rng.integers(0, 2, size=chunk, dtype=np.int8) * 2 - 1
        walk = pos + np.cumsum(steps, dtype=np.int64)
        hit = np.flatnonzero(walk == -1)
        if hit.size:
            chunks.append(walk[: hit[0]])
            break
        chunks.append(walk)
        pos = int(walk[-1])
        n_steps = sum(c.size for c in chunks)
        if max_edges is not None and n_steps > 2 * max_edges:
            raise TreeTooLarge(f"GW tree exceeded {max_edges} edges")
        chunk *= 2
    heights = np.concatenate([[0]] + chunks)
    if max_edges is not None and heights.size > 2 * max_edges + 1:
        raise TreeTooLarge(f"GW tree exceeded {max_edges} edges")
    return PlaneTree(heights.tolist())


def gw_geometric_probability(tree: PlaneTree) -> float:
    return 2.0 ** (-2 * tree.size_edges - 1)


def reroot_dyck(path: DyckPath, i: int) -> DyckPath:
    """Dyck path of the same tree re-rooted at the corner of contour step ``i``."""
    x = path.steps
    two_k = len(x) - 1
    if not 0 <= i <= two_k:
        raise IndexError(f"reroot index {i} outside [0, {two_k}]")
    out = []
    for j in range(two_k + 1):
        ij = i + j if i + j <= two_k else i + j - two_k
        lo, hi = min(i, ij), max(i, ij)
        out.append(x[i] + x[ij] - 2 * min(x[lo : hi + 1]))
    return DyckPath(tuple(out))


def format_tree(tree: PlaneTree) -> str:
    return f"tree {tree.size_edges}\n{DyckPath(tree.contour_heights).word()}\n"


def parse_tree(text: str) -> PlaneTree:
    lines = text.split("\n")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "tree":
        raise ValidationError("expected header 'tree <k>'")
    k = int(head[1])
    word = lines[1] if len(lines) > 1 else ""
    if len(word) != 2 * k:
        raise ValidationError(f"Dyck word length {len(word)} != 2k = {2 * k}")
    return dyck_to_tree(DyckPath.from_word(word))
