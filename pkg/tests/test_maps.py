import numpy as np
import pytest
from hypothesis import given, strategies as st

from planarlab.cvs import cvs_forward
from planarlab.errors import ValidationError
from planarlab.labels import sample_uniform_labeled_tree
from planarlab.maps import (
    RootedMap,
    all_pairs_distances,
    bfs_distances,
    canonical_code,
    canonical_form,
    faces,
    is_bipartite,
    profile,
    radius,
    read_qmap,
    relabel,
    to_dot,
    trivial_from_quad,
    trivial_to_quad,
    validate,
    write_qmap,
)

from strategies import labeled_trees


def single_edge():
    return RootedMap([0, 1])


def test_single_edge_map():
    m = single_edge()
    r = validate(m)
    assert r.ok and (r.V, r.E, r.F) == (2, 1, 1)
    assert m.face_degrees().tolist() == [2]
    assert faces(m) == [(0, 1)]
    assert bfs_distances(m, 0).tolist() == [0, 1]


def test_loop_map():
    m = RootedMap([1, 0])
    r = validate(m)
    assert r.ok and (r.V, r.E, r.F) == (1, 1, 2)


@pytest.mark.parametrize("sigma,alpha,reason", [
    ([0, 0], None, "sigma is not a permutation"),
    ([0, 1, 2], None, "half-edge count"),
    ([0, 1], [0, 1], "fixed point"),
    ([0, 1, 2, 3], None, "not connected"),
])
def test_validation_failures(sigma, alpha, reason):
    r = validate(RootedMap(sigma, alpha=alpha))
    assert not r.ok and reason in r.reason


def test_non_planar_rejected():
    # one vertex with two interleaved loops lives on the torus
    r = validate(RootedMap([2, 3, 1, 0]))
    assert not r.ok and "Euler" in r.reason


def quad(n, seed):
    return cvs_forward(sample_uniform_labeled_tree(n, seed), 1)


def random_relabel(m, seed):
    perm = np.random.default_rng(seed).permutation(m.half_edge_count)
    return relabel(m, perm)


@given(st.integers(1, 30), st.integers(0, 2**32))
def test_canonical_code_invariant_under_relabelling(n, seed):
    q = quad(n, seed)
    r = random_relabel(q, seed + 1)
    assert validate(r).ok
    assert canonical_code(r) == canonical_code(q)
    assert canonical_code(r, pointed=False) == canonical_code(q, pointed=False)


def test_canonical_code_sees_root():
    q = quad(6, 3)
    codes = {canonical_code(RootedMap(q.sigma, h, q.pointed, q._vertex_of), pointed=False)
             for h in range(q.half_edge_count)}
    assert len(codes) > 1


@given(st.integers(1, 30), st.integers(0, 2**32))
def test_qmap_round_trip(n, seed):
    q = quad(n, seed)
    text = write_qmap(q)
    back = read_qmap(text)
    assert write_qmap(back) == text
    assert canonical_code(back) == canonical_code(q)


def test_qmap_rejects():
    with pytest.raises(ValidationError):
        read_qmap("qmap 2\n")
    with pytest.raises(ValidationError):
        read_qmap("qmap 1\nhalfedges 2\nroot 0\n0 1\n0 0\n")
    with pytest.raises(ValidationError):
        read_qmap("qmap 1\nhalfedges 4\nroot 0\n0 1\n")


def test_canonical_form_is_idempotent():
    q = quad(12, 7)
    c = canonical_form(q)
    assert np.array_equal(canonical_form(c).sigma, c.sigma)
    assert canonical_code(c) == canonical_code(q)


def test_distances():
    q = quad(40, 2)
    d = all_pairs_distances(q)
    assert (d == d.T).all() and (np.diag(d) == 0).all()
    assert radius(q, 0) == d[0].max()
    assert profile(q, 0).sum() == q.num_vertices
    assert is_bipartite(q)


def test_dot_output():
    text = to_dot(quad(3, 1))
    assert text.startswith("graph map {") and text.count("--") == 6


@given(st.integers(1, 25), st.integers(0, 2**32))
def test_trivial_bijection_round_trip(n, seed):
    q = quad(n, seed)
    m = trivial_from_quad(q)
    assert validate(m).ok and m.num_edges == n
    back = trivial_to_quad(m)
    assert canonical_code(back, pointed=False) == canonical_code(q, pointed=False)
    assert (back.face_degrees() == 4).all()
    assert back.num_vertices == m.num_vertices + m.num_faces


@given(labeled_trees(max_k=8))
def test_orbit_counts_match_euler(lt):
    q = cvs_forward(lt, 1)
    assert q.num_vertices - q.num_edges + q.num_faces == 2
