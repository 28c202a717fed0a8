"""Exact finite-k height tails against the limiting tail, showing the O(k^{-1/2}) bias.

    python scripts/height_bias.py 500 2000 8000
"""
import sys

from planarlab.stats import chung_tail, exact_height_tail

ks = [int(a) for a in sys.argv[1:]] or [500, 2000, 8000]
xs = [0.5, 1.0, 1.5]
print("k      " + "  ".join(f"x={x:<4} exact     limit     gap" for x in xs))
for k in ks:
    cells = []
    for x in xs:
        e, c = exact_height_tail(k, x), chung_tail(x)
        cells.append(f"{e:.5f}  {c:.5f}  {e - c:+.4f}")
    print(f"{k:<6} " + "    ".join(cells))
