"""Zooming into self-similar measures.

Magnifying a Bernoulli measure around a typical point reproduces the same
measure, so the running average of component entropies settles at the
entropy of the coin.  A digit measure that skips half the scales shows up as
non-spreading.

Run with ``python3 demos/scenery_and_spreading.py`` (a few seconds).
"""

import math

from fracproj.additive import digit_measure
from fracproj.dyadic import TreeMeasure
from fracproj.scenery import SelfSimilarSource, scenery_orbit, spreading_check

for p in (0.5, 0.3, 0.1):
    stats = scenery_orbit(SelfSimilarSource.bernoulli([p, 1 - p]), steps=200, l=8, seed=0)
    target = -(p * math.log2(p) + (1 - p) * math.log2(1 - p))
    print(f"p = {p}: Cesaro mean {stats.mean:.4f}, coin entropy {target:.4f}")

# Lebesgue measure quarters its mass every two levels; it spreads.
print("Lebesgue spreads:", spreading_check(TreeMeasure.uniform(14), 10, 2, 0.1, [0.0]).spreading)

# Base-4 digits {0, 3}: every other binary level is forced, so half the scales are bad.
rep = spreading_check(digit_measure(20, 2, (0, 3)), 16, 3, 0.1, [0.0])
print("digits {0, 3}: bad fraction", float(rep.bad_fractions.max()), "spreads:", rep.spreading)
