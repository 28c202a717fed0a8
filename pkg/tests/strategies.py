"""Hypothesis strategies shared by the test modules."""
from hypothesis import strategies as st

from planarlab.labels import LabeledTree
from planarlab.treekit import PlaneTree


@st.composite
def dyck_heights(draw, min_k=0, max_k=12):
    k = draw(st.integers(min_k, max_k))
    h = [0]
    ups = 0
    while len(h) < 2 * k + 1:
        remaining = 2 * k + 1 - len(h)
        can_up = ups < k and h[-1] + 1 < remaining
        can_down = h[-1] > 0
        go_up = can_up and (not can_down or draw(st.booleans()))
        if go_up:
            ups += 1
        h.append(h[-1] + 1 if go_up else h[-1] - 1)
    return h


@st.composite
def plane_trees(draw, min_k=0, max_k=12):
    return PlaneTree(draw(dyck_heights(min_k, max_k)))


@st.composite
def labeled_trees(draw, min_k=1, max_k=10):
    tree = draw(plane_trees(min_k, max_k))
    inc = draw(st.lists(st.sampled_from([-1, 0, 1]), min_size=tree.size_edges,
                        max_size=tree.size_edges))
    return LabeledTree.from_increments(tree, inc)
