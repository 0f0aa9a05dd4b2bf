"""Unions of translated fibers on a dyadic grid.

Given a set of base points and a fiber over each one, the union of the
translated fibers is at least as large as a single fiber.  When the base
measure spreads, the union is much larger; the experiment records the growth
exponent and checks each hypothesis separately.

Run with ``python3 demos/sumset_growth.py`` (a few seconds).
"""

from fracproj.additive import GridSet, additive_energy, preset_experiment, translate_union

# A tiny example by hand.
A = GridSet.from_indices(6, [0, 8, 16])
fibers = {a: GridSet.from_indices(6, [0, 1, 2, 3]) for a in A.indices()}
report, union = translate_union(A, fibers)
print(f"|A| = {len(A)}, fiber size 4, union size {report.union_size}")
print("additive energy of A with one fiber:", additive_energy(A, fibers[0]))

for name in ("positive", "failed"):
    result = preset_experiment(name, n=12)
    checks = result.checks
    print(
        f"{name}: growth {result.growth}, exponent {result.report.exponent:.4f}, "
        f"spreading hypothesis {'holds' if checks.spreading else 'fails'}"
    )
