"""Where does the Bernoulli convolution lose entropy?

Sweep the contraction ratio through the golden ratio and watch the
normalized entropy dip there.  The dip detector then names the word pair
responsible for the drop.

Run with ``python3 demos/golden_dip.py`` (about twenty seconds).
"""

from fracproj.exact import parse_exact
from fracproj.ifs import WeightedIFS
from fracproj.overlaps import exact_overlap_search
from fracproj.parametric import ParametricFamily, delta_jet
from fracproj.scan import dip_detector, entropy_profile

family = ParametricFamily.bernoulli_convolution()
golden = parse_exact("(sqrt(5)-1)/2")

# A coarse profile at depth 12 around the golden ratio.
grid = [0.61 + 0.002 * i for i in range(11)]
profile = entropy_profile(family, grid, 12)
for t, h in zip(profile.params, profile.normalized):
    print(f"t = {t:.3f}   H/n = {h:.5f}")

# Flag points that fall below their neighbours and attach an exact witness.
report = dip_detector(profile, threshold=0.0103, family=family)
for dip in report.flagged:
    print(f"dip at t = {dip.t:.3f}, deficit {dip.deficit:.4f}, witness {dip.witness}")

# The witness is an exact coincidence in the quadratic field.
pairs = exact_overlap_search(WeightedIFS.bernoulli_convolution(golden), 3)
print("exact overlaps of length 3:", [(str(a), str(b)) for a, b in pairs])

# The coding difference vanishes at the golden ratio with nonzero slope,
# so the coincidence is transversal.
jet = delta_jet(family, "100(0)", "011(0)", golden)
print(f"difference {jet.value}, derivative {jet.first}")
