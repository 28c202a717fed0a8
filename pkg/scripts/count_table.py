"""Print exact counts of trees, labeled trees and rooted quadrangulations."""
import time

from planarlab.cvs import count_quadrangulations, quadrangulation_formula
from planarlab.labels import count_labeled_trees
from planarlab.treekit import catalan, enumerate_trees

print(f"{'k':>2} {'trees':>6} {'catalan':>8} {'labeled':>8}")
for k in range(9):
    print(f"{k:>2} {len(enumerate_trees(k)):>6} {catalan(k):>8} {count_labeled_trees(k):>8}")

print(f"\n{'n':>2} {'enumerated':>10} {'formula':>8} {'seconds':>8}")
for n in range(1, 7):
    t = time.time()
    got = count_quadrangulations(n)
    print(f"{n:>2} {got:>10} {quadrangulation_formula(n):>8} {time.time() - t:>8.2f}")
