import collections

import numpy as np
import pytest
from hypothesis import given, strategies as st

from planarlab.errors import BoundExceeded, ValidationError
from planarlab.labels import (
    GridFunction,
    LabeledTree,
    count_labeled_trees,
    enumerate_labeled_trees,
    format_labeled_tree,
    parse_labeled_tree,
    rescaled_pair,
    sample_excursion,
    sample_label_contours,
    sample_snake,
    sample_snake_batch,
    sample_uniform_labeled_tree,
)
from planarlab.metric import dg_index
from planarlab.treekit import PlaneTree, vertex_ids

from strategies import labeled_trees


@pytest.mark.parametrize("k", range(5))
def test_labeled_count(k):
    trees = enumerate_labeled_trees(k)
    assert len(trees) == count_labeled_trees(k) == 3**k * [1, 1, 2, 5, 14][k]
    assert len(set(trees)) == len(trees)


def test_labeled_bound():
    with pytest.raises(BoundExceeded):
        enumerate_labeled_trees(8)


def test_label_validation():
    t = PlaneTree([0, 1, 2, 1, 0])
    LabeledTree(t, [0, 1, 0])
    with pytest.raises(ValidationError):
        LabeledTree(t, [1, 1, 0])
    with pytest.raises(ValidationError):
        LabeledTree(t, [0, 2, 1])
    with pytest.raises(ValidationError):
        LabeledTree(t, [0, 1])
    with pytest.raises(ValidationError):
        LabeledTree.from_increments(t, [1])


def test_labels_read_only():
    lt = sample_uniform_labeled_tree(5, 0)
    with pytest.raises(ValueError):
        lt.labels[0] = 3


@given(labeled_trees())
def test_ltree_format_round_trip(lt):
    assert parse_labeled_tree(format_labeled_tree(lt)) == lt
    assert hash(parse_labeled_tree(format_labeled_tree(lt))) == hash(lt)


@pytest.mark.parametrize("text", ["ltree 1\nUD\n", "tree 1\nUD\n+\n", "ltree 1\nUD\n*\n",
                                  "ltree 2\nUD\n+\n"])
def test_ltree_parse_rejects(text):
    with pytest.raises(ValidationError):
        parse_labeled_tree(text)


@given(st.integers(1, 40), st.integers(0, 2**32))
def test_label_contours_are_consistent(k, seed):
    heights, V = sample_label_contours(k, 4, seed)
    ids = vertex_ids(heights)
    for h, v, i in zip(heights, V, ids):
        assert v[0] == v[-1] == 0
        assert np.abs(np.diff(v)).max() <= 1
        per_vertex = {}
        for vid, lab in zip(i.tolist(), v.tolist()):
            assert per_vertex.setdefault(vid, lab) == lab
        tree = PlaneTree(h.tolist())
        labels = [per_vertex[u] for u in range(tree.num_vertices)]
        LabeledTree(tree, labels)


def test_labeled_sampler_is_uniform():
    # 2 edges: 2 trees x 9 label vectors, chi-square 99.9% critical value for 17 dof is 40.8
    m = 36_000
    rng = np.random.default_rng(8)
    counts = collections.Counter(
        format_labeled_tree(sample_uniform_labeled_tree(2, rng)) for _ in range(m)
    )
    assert len(counts) == 18
    chi2 = sum((c - m / 18) ** 2 / (m / 18) for c in counts.values())
    assert chi2 < 40.8


def test_grid_function_validation():
    with pytest.raises(ValidationError):
        GridFunction(np.array([0.0, 1.0]))
    with pytest.raises(ValidationError):
        GridFunction(np.array([0.0, -1.0, 0.0]))
    GridFunction(np.array([0.0, -1.0, 0.0]), excursion=False)
    g = GridFunction(np.array([0.0, 1.0, 0.0]))
    assert g.N == 2 and g.index(0.5) == 1
    with pytest.raises(IndexError):
        g.index(0.3)
    with pytest.raises(IndexError):
        g.index(1.5)


def test_grid_function_csv_round_trip():
    e = sample_excursion(20, 3)
    back = GridFunction.from_csv(e.to_csv())
    assert np.array_equal(back.values, e.values)
    assert back.meta == e.meta
    assert e.to_csv() == back.to_csv()


def test_lattice_heights():
    e = sample_excursion(15, 1)
    x = e.lattice_heights()
    assert x.dtype.kind == "i" and np.abs(np.diff(x)).tolist() == [1] * 30
    with pytest.raises(ValidationError):
        GridFunction(np.array([0.0, 0.3, 0.5, 0.2, 0.0])).lattice_heights()


def test_rescaled_pair_constants():
    lt = sample_uniform_labeled_tree(8, 2)
    c, v = rescaled_pair(lt)
    assert c.values[1] == pytest.approx(16 ** -0.5)
    assert np.allclose(v.values, lt.label_contour * (9 / 64) ** 0.25)


def test_snake_equal_on_identified_times():
    e = sample_excursion(40, 11)
    z = sample_snake_batch(e, 50, 12)
    n = e.N
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    same = np.isclose(dg_index(e, i, j), 0.0, atol=1e-12)
    for a, b in zip(*np.nonzero(same)):
        assert np.array_equal(z[:, a], z[:, b])
    assert (z[:, 0] == 0).all()


def test_snake_variance_small_run():
    e = sample_excursion(10, 4)
    z = sample_snake_batch(e, 20_000, 5)
    var = z.var(axis=0)
    se = e.values * np.sqrt(2 / z.shape[0])
    assert (np.abs(var - e.values) <= 4 * se + 1e-12).all()


def test_snake_path_reproducible():
    e = sample_excursion(10, 4)
    assert np.array_equal(sample_snake(e, 9).z, sample_snake(e, 9).z)
    assert sample_snake(e, 9).argmin() == int(np.argmin(sample_snake(e, 9).z))
