"""Projections of the four-corner set.

The four-corner set has dimension one.  Almost every projection keeps that
dimension, but along the coincidence directions two corners land on top of
each other and the covering numbers grow more slowly.

Run with ``python3 demos/four_corner_projections.py`` (a few seconds).
"""

import math

from fracproj.planar import (
    Direction,
    assouad_estimate,
    coincidence_witnesses,
    direction_scan,
    four_corner_ifs,
    planar_attractor_cells,
)

fc = four_corner_ifs()

# Depth-one coincidence directions: the axes and the two diagonals.
for w in coincidence_witnesses(fc, 1):
    print(f"theta = {w.direction.theta:.4f}  ({w.direction.symbolic()})  words {w.words}")

# Covering counts at side 4^-m: 2^m on the axis and 3^m on the diagonal.
diagonal = Direction.from_vector(1, 1)
for m in range(1, 7):
    axis, diag = direction_scan(fc, [0.0, diagonal], 2 * m)
    print(f"m = {m}: axis {axis.cover_count:5d}   diagonal {diag.cover_count:5d}")

# A generic direction keeps nearly full entropy at depth 14.
row = direction_scan(fc, [9 * math.pi / 64], 14)[0]
print(f"generic direction H/n = {row.h_over_n:.4f}")

# The two-scale covering estimate of the set itself.
est = assouad_estimate(planar_attractor_cells(fc, 10), 2, 8)
print(f"two-scale estimate at k = 2, m = 8: {est.estimate}")
