"""Labeled trees, label contours, discrete excursions and the Gaussian snake."""
from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._random import make_rng
from .errors import BoundExceeded, ValidationError
from .treekit import (
    DyckPath,
    PlaneTree,
    catalan,
    dyck_to_tree,
    enumerate_trees,
    first_visit_times,
    uniform_dyck_batch,
    vertex_ids,
)

EXHAUSTIVE_LABEL_BOUND = 7
_INC_CHARS = {1: "+", 0: "0", -1: "-"}
_CHAR_INC = {v: k for k, v in _INC_CHARS.items()}


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


class LabeledTree:
    """Plane tree with integer labels, root label 0 and increments in {-1, 0, 1}."""

    def __init__(self, tree: PlaneTree, labels):
        labels = _frozen(labels, np.int64)
        if labels.shape != (tree.num_vertices,):
            raise ValidationError("need one label per vertex")
        if labels[0] != 0:
            raise ValidationError("root label must be 0")
        parent = np.asarray(tree.parent[1:], dtype=np.int64)
        if parent.size and np.abs(labels[1:] - labels[parent]).max() > 1:
            raise ValidationError("label increment outside {-1, 0, 1}")
        self.tree = tree
        self.labels = labels
        self.label_contour = _frozen(labels[list(tree.contour_vertices)], np.int64)

    @classmethod
    def from_increments(cls, tree: PlaneTree, increments) -> "LabeledTree":
        """Increments are listed per non-root vertex in first-visit order."""
        inc = list(increments)
        if len(inc) != tree.size_edges:
            raise ValidationError("need one increment per edge")
        labels = [0] * tree.num_vertices
        for v in range(1, tree.num_vertices):
            labels[v] = labels[tree.parent[v]] + inc[v - 1]
        return cls(tree, labels)

    @property
    def k(self) -> int:
        return self.tree.size_edges

    def increments(self) -> np.ndarray:
        parent = np.asarray(self.tree.parent[1:], dtype=np.int64)
        return self.labels[1:] - self.labels[parent]

    def __eq__(self, other):
        if not isinstance(other, LabeledTree):
            return NotImplemented
        return self.tree == other.tree and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash((self.tree, self.labels.tobytes()))

    def __repr__(self):
        return f"LabeledTree({self.tree!r}, labels={self.labels.tolist()})"


def enumerate_labeled_trees(k: int, bound: int = EXHAUSTIVE_LABEL_BOUND) -> list[LabeledTree]:
    if k > bound:
        raise BoundExceeded(f"enumerate_labeled_trees: k={k} exceeds exhaustive bound {bound}")
    out = []
    for tree in enumerate_trees(k, bound=max(bound, k)):
        for inc in itertools.product((-1, 0, 1), repeat=k):
            out.append(LabeledTree.from_increments(tree, inc))
    return out


def count_labeled_trees(k: int) -> int:
    return 3**k * catalan(k)


def sample_label_contours(k: int, count: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Batch of uniform labeled trees as (contour heights, label contours).

    Each down-step undoes the increment of the up-step that created the
    vertex being left, so the label contour is an integer cumulative sum.
    """
    rng = make_rng(seed)
    heights = uniform_dyck_batch(k, count, rng)
    eta = rng.integers(-1, 2, size=(count, k), dtype=np.int64)
    if k == 0:
        return heights, np.zeros((count, 1), dtype=np.int64)
    ids = vertex_ids(heights)
    up = heights[:, 1:] > heights[:, :-1]
    # increment of the vertex entered on an up-step, or left on a down-step
    moving = np.where(up, ids[:, 1:], ids[:, :-1]) - 1
    step = np.take_along_axis(eta, moving, axis=1)
    step = np.where(up, step, -step)
    labels = np.zeros(heights.shape, dtype=np.int64)
    np.cumsum(step, axis=1, out=labels[:, 1:])
    return heights, labels


def sample_uniform_labeled_tree(k: int, seed) -> LabeledTree:
    heights, contour = sample_label_contours(k, 1, seed)
    tree = PlaneTree(heights[0].tolist())
    labels = np.empty(k + 1, dtype=np.int64)
    labels[list(tree.contour_vertices)] = contour[0]
    return LabeledTree(tree, labels)


def label_contour(lt: LabeledTree) -> np.ndarray:
    return lt.label_contour


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a function at the grid times i/N, i = 0..N.

    ``meta`` carries the scale constants used to build it (``h`` is the
    height unit of a lattice excursion).
    """

    values: np.ndarray
    meta: Mapping[str, float] = field(default_factory=dict)
    excursion: bool = True

    def __post_init__(self):
        v = _frozen(self.values, np.float64)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "meta", dict(self.meta))
        if v.ndim != 1 or v.size < 1:
            raise ValidationError("grid values must be a non-empty vector")
        if v[0] != 0 or v[-1] != 0:
            raise ValidationError("grid function must vanish at both endpoints")
        if self.excursion and (v < 0).any():
            raise ValidationError("excursion takes a negative value")

    @property
    def N(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N + 1) / max(self.N, 1)

    def index(self, s: float) -> int:
        """Grid index of time ``s``; must land on the grid."""
        if not 0 <= s <= 1:
            raise IndexError(f"time {s} outside [0, 1]")
        i = round(s * self.N)
        if abs(i - s * self.N) > 1e-9:
            raise IndexError(f"time {s} is not a grid point of N={self.N}")
        return i

    def lattice_heights(self) -> np.ndarray:
        """Integer heights v/h; raises unless steps are exactly +-h."""
        h = self.meta.get("h")
        if h is None:
            h = abs(self.values[1] - self.values[0]) if self.N else 1.0
        if h <= 0:
            raise ValidationError("lattice unit must be positive")
        x = np.rint(self.values / h).astype(np.int64)
        if not np.allclose(x * h, self.values, atol=1e-9 * max(1.0, h)):
            raise ValidationError("values are not multiples of the lattice unit")
        if self.N % 2 or (self.N and (np.abs(np.diff(x)) != 1).any()):
            raise ValidationError("steps must be exactly +-h")
        return x

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key in sorted(self.meta):
            buf.write(f"# {key}={float(self.meta[key])!r}\n")
        buf.write("t,value\n")
        for t, v in zip(self.times, self.values):
            buf.write(f"{float(t)!r},{float(v)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, excursion: bool = True) -> "GridFunction":
        meta, vals = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = float(val)
            elif line and line != "t,value":
                vals.append(float(line.split(",")[1]))
        return cls(np.array(vals), meta, excursion)


def rescaled_pair(lt: LabeledTree) -> tuple[GridFunction, GridFunction]:
    k = lt.k
    if k < 1:
        raise ValidationError("rescaling needs k >= 1")
    c_scale = (2 * k) ** -0.5
    v_scale = (9 / (8 * k)) ** 0.25
    c = GridFunction(np.array(lt.tree.contour_heights) * c_scale, {"h": c_scale, "k": k})
    v = GridFunction(lt.label_contour * v_scale, {"scale": v_scale, "k": k}, excursion=False)
    return c, v


def sample_excursion(k: int, seed) -> GridFunction:
    """Rescaled contour of a uniform tree with k edges."""
    if k < 1:
        raise ValidationError("need k >= 1")
    h = (2 * k) ** -0.5
    return GridFunction(uniform_dyck_batch(k, 1, seed)[0] * h, {"h": h, "k": k})


@dataclass(frozen=True, eq=False)
class SnakePath:
    base: GridFunction
    z: np.ndarray

    def __post_init__(self):
        z = _frozen(self.z, np.float64)
        object.__setattr__(self, "z", z)
        if z.shape != self.base.values.shape:
            raise ValidationError("snake and base grid differ in length")

    def argmin(self) -> int:
        return int(np.argmin(self.z))


def sample_snake_batch(e: GridFunction, count: int, seed) -> np.ndarray:
    """``count`` snake paths over ``e``, shape (count, N+1).

    One standard normal (numpy's ziggurat on PCG64) per up-step, scaled to
    variance h. The path is the running sum of these, with each down-step
    cancelling its matching up-step; every time then reads the value stored
    at the first visit of its vertex, so times coding the same vertex carry
    bit-identical values.
    """
    x = e.lattice_heights()
    h = float(e.meta.get("h", abs(e.values[1] - e.values[0]) if e.N else 1.0))
    rng = make_rng(seed)
    n = x.size
    if n == 1:
        return np.zeros((count, 1))
    ids = vertex_ids(x)
    up = x[1:] > x[:-1]
    k = int(up.sum())
    xi = rng.standard_normal((count, k)) * math.sqrt(h)
    moving = np.where(up, ids[1:], ids[:-1]) - 1
    step = xi[:, moving] * np.where(up, 1.0, -1.0)
    running = np.zeros((count, n))
    np.cumsum(step, axis=1, out=running[:, 1:])
    return running[:, first_visit_times(x)]


def sample_snake(e: GridFunction, seed) -> SnakePath:
    return SnakePath(e, sample_snake_batch(e, 1, seed)[0])


def format_labeled_tree(lt: LabeledTree) -> str:
    word = DyckPath(lt.tree.contour_heights).word()
    inc = "".join(_INC_CHARS[int(d)] for d in lt.increments())
    return f"ltree {lt.k}\n{word}\n{inc}\n"


def parse_labeled_tree(text: str) -> LabeledTree:
    lines = text.split("\n")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "ltree":
        raise ValidationError("expected header 'ltree <k>'")
    k = int(head[1])
    word = lines[1] if len(lines) > 1 else ""
    inc = lines[2] if len(lines) > 2 else ""
    if len(word) != 2 * k or len(inc) != k:
        raise ValidationError("ltree record lengths do not match k")
    try:
        steps = [_CHAR_INC[c] for c in inc]
    except KeyError as err:
        raise ValidationError(f"bad increment character {err}") from None
    return LabeledTree.from_increments(dyck_to_tree(DyckPath.from_word(word)), steps)
