"""Sample one pointed quadrangulation, validate it and print a few statistics.

    python scripts/sample_and_check.py 10000 7
"""
import sys

import numpy as np

from planarlab.cvs import check_distance_identity, cvs_forward, cvs_inverse
from planarlab.labels import sample_uniform_labeled_tree
from planarlab.maps import bfs_distances, validate

n = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
rng = np.random.default_rng(seed)
lt = sample_uniform_labeled_tree(n, rng)
eps = int(rng.choice([-1, 1]))
q = cvs_forward(lt, eps)
rep = validate(q)
d = bfs_distances(q, q.pointed)
print(f"V={rep.V} E={rep.E} F={rep.F} valid={rep.ok}")
print(f"all faces quadrangles: {bool((q.face_degrees() == 4).all())}")
print(f"distance identity: {check_distance_identity(q, lt).ok}")
print(f"radius from v_*: {d.max()}  rescaled: {d.max() * (9 / (8 * n)) ** 0.25:.3f}")
print(f"inverse recovers input: {cvs_inverse(q) == (lt, eps)}")
