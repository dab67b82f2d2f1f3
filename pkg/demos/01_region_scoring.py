"""Why the four-corner recurrence is a heuristic.

Scores a small grid whose best connected region cannot be grown from any
single corner, then compares each corner run with the exact optimum.
"""

import numpy as np

from regionsearch.mwcs import CORNERS, dp_corner_run, dp_max_region, exact_mwcs, is_dp_capturable

# row 0 is the bottom row
grid = np.array([[-1, -1, 10, -1],
                 [-1, 10, 1, 35],
                 [-1, -1, 40, -90]], dtype=float)

for corner in CORNERS:
    region, score = dp_corner_run(grid, corner)
    print(f"{corner.name:<13} {score:>5.0f}  {region.sorted_cells()}")

region, score = dp_max_region(grid)
best_region, best = exact_mwcs(grid)
print(f"\nfour corners  {score:>5.0f}")
print(f"exact         {best:>5.0f}  {best_region.sorted_cells()}")
print("exact region capturable by one corner run:", is_dp_capturable(best_region.cells))

# random grids: the heuristic never overshoots and usually lands on the optimum
rng = np.random.default_rng(0)
hits = 0
for _ in range(500):
    m = rng.integers(-10, 11, size=(4, 4)).astype(float)
    dp, ex = dp_max_region(m)[1], exact_mwcs(m)[1]
    assert dp <= ex
    hits += dp == ex
print(f"\n4x4 random grids where the recurrence finds the optimum: {hits}/500")
