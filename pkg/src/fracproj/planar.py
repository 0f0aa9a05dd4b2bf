"""Planar homothety IFSs with their orthogonal projections, plus two-scale covering estimates.

A direction is an angle ``theta in [0, pi)`` and projects by
``pi_theta(x, y) = x cos(theta) + y sin(theta)``.  When a direction is
given by an integer vector ``(u, v)``, cosine and sine are exact elements of
``Q(sqrt(u^2 + v^2))`` and projected translations of rational systems are
compared exactly.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dyadic import Chart, DyadicCell, TreeMeasure, bin_points, shannon_entropy
from .errors import EmptyComponentError
from .exact import QuadraticNumber, is_exact
from .ifs import DEFAULT_BUDGET, AffineContraction, WeightedIFS, attractor_cells, build_tree_measure, stopping_atoms

__all__ = [
    "PlanarIFS",
    "Direction",
    "four_corner_ifs",
    "project_ifs",
    "coincidence_direction",
    "coincidence_witnesses",
    "DirectionScanRow",
    "direction_scan",
    "scan_to_csv",
    "witnesses_to_json",
    "AssouadEstimate",
    "assouad_estimate",
    "build_planar_tree",
    "planar_attractor_cells",
    "strip_conditional",
]

log = logging.getLogger(__name__)

MERGE_TOL = 1e-12


@dataclass(frozen=True)
class PlanarIFS:
    """Maps ``z -> r_i z + (a_i, b_i)`` with ``0 < r_i < 1`` and weights ``p_i``."""

    ratios: tuple
    translations: tuple
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(self.ratios))
        object.__setattr__(self, "translations", tuple(tuple(t) for t in self.translations))
        object.__setattr__(self, "weights", tuple(self.weights))
        if not (len(self.ratios) == len(self.translations) == len(self.weights)) or not self.ratios:
            raise ValueError("need one (ratio, translation, weight) triple per map")
        if any(not 0 < float(r) < 1 for r in self.ratios):
            raise ValueError("planar maps are homotheties with ratio in (0, 1)")
        if any(len(t) != 2 for t in self.translations):
            raise ValueError("translations are 2-vectors")
        if any(float(p) <= 0 for p in self.weights) or abs(sum(float(p) for p in self.weights) - 1) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")

    def __len__(self):
        return len(self.ratios)

    def similarity_dimension(self) -> float:
        p = np.array([float(q) for q in self.weights])
        r = np.array([float(q) for q in self.ratios])
        return float(np.dot(p, np.log(p)) / np.dot(p, np.log(r)))

    def hull(self) -> tuple[tuple, tuple]:
        """Bounding box ``((x_lo, y_lo), (x_hi, y_hi))`` of the attractor."""
        fps = [tuple(c / (1 - r) for c in t) for r, t in zip(self.ratios, self.translations)]
        lo = tuple(min(f[j] for f in fps) for j in range(2))
        hi = tuple(max(f[j] for f in fps) for j in range(2))
        return lo, hi

    def rescaled(self) -> tuple[PlanarIFS, Chart]:
        """Conjugate by one homothety taking the bounding box into ``[0, 1]**2``."""
        lo, hi = self.hull()
        scale = max(hi[0] - lo[0], hi[1] - lo[1])
        if scale == 0:
            scale = 1
        trans = [
            tuple((t[j] + r * lo[j] - lo[j]) / scale for j in range(2)) for r, t in zip(self.ratios, self.translations)
        ]
        return PlanarIFS(self.ratios, trans, self.weights), Chart(lo, scale)


def four_corner_ifs() -> PlanarIFS:
    """Ratio-1/4 maps onto the four corner boxes of the unit square, uniform weights."""
    corners = [(0, 0), (3, 0), (0, 3), (3, 3)]
    return PlanarIFS(
        [Fraction(1, 4)] * 4,
        [(Fraction(a, 4), Fraction(b, 4)) for a, b in corners],
        [Fraction(1, 4)] * 4,
    )


@dataclass(frozen=True)
class Direction:
    """Angle in ``[0, pi)``, optionally backed by an integer vector for exact projection."""

    theta: float
    vector: tuple[int, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % math.pi)

    @classmethod
    def from_vector(cls, u, v) -> Direction:
        """Direction of ``(u, v)``; rational entries are scaled to coprime integers."""
        fu, fv = Fraction(u), Fraction(v)
        if fu == 0 and fv == 0:
            raise ValueError("zero vector has no direction")
        den = math.lcm(fu.denominator, fv.denominator)
        a, b = int(fu * den), int(fv * den)
        g = math.gcd(a, b)
        a, b = a // g, b // g
        if b < 0 or (b == 0 and a < 0):
            a, b = -a, -b
        return cls(math.atan2(b, a), (a, b))

    def cos_sin(self):
        """Exact ``(cos, sin)`` when backed by a vector, floats otherwise."""
        if self.vector is None:
            return math.cos(self.theta), math.sin(self.theta)
        u, v = self.vector
        norm = QuadraticNumber.sqrt(u * u + v * v)
        c, s = u / norm, v / norm
        return _simplify(c), _simplify(s)

    def project(self, point):
        c, s = self.cos_sin()
        x, y = point
        if not (is_exact(x) and is_exact(y)) or not is_exact(c):
            return float(x) * float(c) + float(y) * float(s)
        return _simplify(x * c + y * s)

    def symbolic(self) -> str:
        if self.vector is None:
            return repr(self.theta)
        u, v = self.vector
        return f"atan2({v}, {u})"


def _simplify(q):
    if isinstance(q, QuadraticNumber) and q.is_rational():
        return q.a
    return q


def project_ifs(ifs: PlanarIFS, direction: Direction | float) -> WeightedIFS:
    """The IFS ``x -> r_i x + pi_theta(t_i)`` on the line, identical maps merged.

    Maps are compared exactly when ratios and projected translations are
    exact, otherwise with absolute tolerance ``1e-12`` (merges of distinct
    float values are logged).  Maps come out sorted by ``(ratio, translation)``.
    """
    d = direction if isinstance(direction, Direction) else Direction(direction)
    merged: list[list] = []
    for r, t, p in zip(ifs.ratios, ifs.translations, ifs.weights):
        s = d.project(t)
        exact = is_exact(r) and is_exact(s)
        for entry in merged:
            er, es, _ = entry
            if exact and is_exact(er) and is_exact(es):
                same = er == r and es == s
            else:
                same = abs(float(er) - float(r)) <= MERGE_TOL and abs(float(es) - float(s)) <= MERGE_TOL
                if same and float(es) != float(s):
                    log.info("merged near-coincident maps %r and %r at theta=%r", es, s, d.theta)
            if same:
                entry[2] = entry[2] + p
                break
        else:
            merged.append([r, s, p])
    merged.sort(key=lambda e: (float(e[0]), float(e[1])))
    all_exact = all(is_exact(e[0]) and is_exact(e[1]) and is_exact(e[2]) for e in merged)
    weights = [e[2] if all_exact else float(e[2]) for e in merged]
    return WeightedIFS(tuple(AffineContraction(e[0], e[1]) for e in merged), tuple(weights))


def coincidence_direction(t1, t2) -> Direction:
    """The direction ``theta`` with ``pi_theta(t1) == pi_theta(t2)``.

    It is orthogonal to ``t1 - t2``; exact inputs give a vector-backed
    direction.
    """
    dx, dy = t1[0] - t2[0], t1[1] - t2[1]
    if dx == 0 and dy == 0:
        raise ValueError("degenerate pair: t1 == t2")
    if all(is_exact(v) for v in (dx, dy)) and not any(isinstance(v, QuadraticNumber) for v in (dx, dy)):
        return Direction.from_vector(-dy, dx)
    return Direction(math.atan2(float(dx), -float(dy)))


@dataclass(frozen=True)
class CoincidenceWitness:
    words: tuple[str, str]
    direction: Direction

    def to_dict(self) -> dict:
        return {"words": list(self.words), "theta": self.direction.theta, "theta_exact": self.direction.symbolic()}


def coincidence_witnesses(ifs: PlanarIFS, depth: int) -> list[CoincidenceWitness]:
    """One word pair per direction where two depth-``depth`` cylinders project onto the same set.

    For a homogeneous system two cylinders of equal length project to the
    same set exactly when their translations project to the same point.
    """
    m = len(ifs)
    words = [()]
    data = {(): (Fraction(1), (Fraction(0), Fraction(0)))}
    for _ in range(depth):
        nxt = []
        for w in words:
            r, (x, y) = data[w]
            for i in range(m):
                ti = ifs.translations[i]
                data[w + (i,)] = (r * ifs.ratios[i], (x + r * ti[0], y + r * ti[1]))
                nxt.append(w + (i,))
        words = nxt
    seen: dict = {}
    for a in range(len(words)):
        for b in range(a + 1, len(words)):
            I, J = words[a], words[b]
            if data[I][0] != data[J][0]:
                continue
            d = coincidence_direction(data[I][1], data[J][1])
            key = d.vector if d.vector is not None else round(d.theta, 12)
            if key not in seen:
                seen[key] = CoincidenceWitness(("".join(map(str, I)), "".join(map(str, J))), d)
    return sorted(seen.values(), key=lambda w: w.direction.theta)


# ----------------------------------------------------------------------
# scans


@dataclass(frozen=True)
class DirectionScanRow:
    theta: float
    depth: int
    h_over_n: float
    cover_count: int
    merged_map_count: int


def direction_scan(
    ifs: PlanarIFS,
    thetas: Sequence[Direction | float],
    n: int,
    guard: int = 6,
    budget: int = DEFAULT_BUDGET,
    method: str = "auto",
) -> list[DirectionScanRow]:
    """Per direction: normalized entropy of the projected measure and its covering count at ``2**-n``.

    The covering count is the number of depth-``n`` cells (in the rescaled
    chart of the projected attractor) hit by the atoms ``f_I(x0)``,
    ``I in Lambda_n``.
    """
    if len(thetas) == 0:
        raise ValueError("empty direction grid")
    rows = []
    for th in thetas:
        d = th if isinstance(th, Direction) else Direction(th)
        proj = project_ifs(ifs, d)
        mu = build_tree_measure(proj, n, guard=guard, budget=budget, method=method)
        scaled, _ = proj.rescaled()
        cells = attractor_cells(scaled.ratios, scaled.translations, scaled.probabilities, n, budget=budget)
        rows.append(DirectionScanRow(d.theta, n, shannon_entropy(mu, n).normalized, len(cells), len(proj)))
    return rows


def scan_to_csv(rows: Sequence[DirectionScanRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "depth", "H_over_n", "cover_count", "merged_map_count"])
    for r in rows:
        w.writerow([repr(r.theta), r.depth, repr(r.h_over_n), r.cover_count, r.merged_map_count])
    return buf.getvalue()


def witnesses_to_json(witnesses: Sequence[CoincidenceWitness]) -> str:
    return json.dumps([w.to_dict() for w in witnesses], indent=2)


# ----------------------------------------------------------------------
# two-scale Assouad estimate


@dataclass
class AssouadEstimate:
    """``max_Q log2 N(Q, 2**-(k+m)) / m`` over depth-``k`` cells ``Q`` meeting the set."""

    k: int
    m: int
    ratios: dict = field(repr=False)

    @property
    def estimate(self) -> float:
        return max(self.ratios.values())

    @property
    def big_scale(self) -> float:
        return 2.0**-self.k

    @property
    def small_scale(self) -> float:
        return 2.0 ** -(self.k + self.m)


def assouad_estimate(cells: Sequence[DyadicCell], k: int, m: int) -> AssouadEstimate:
    """Two-scale localized covering exponent of a set given by its depth-``k+m`` cells."""
    if m < 1:
        raise ValueError("m must be at least 1")
    cells = list(cells)
    if not cells:
        raise ValueError("empty set")
    if any(c.depth != k + m for c in cells):
        raise ValueError("cells must all have depth k + m")
    counts: dict = {}
    for c in set(cells):
        key = tuple(x >> m for x in c.coords)
        counts[key] = counts.get(key, 0) + 1
    ratios = {DyadicCell(k, key): math.log2(v) / m for key, v in sorted(counts.items())}
    return AssouadEstimate(k, m, ratios)


# ----------------------------------------------------------------------
# planar trees and strips


def _planar_arrays(ifs: PlanarIFS):
    r = np.array([float(x) for x in ifs.ratios])
    t = np.array([[float(a), float(b)] for a, b in ifs.translations])
    p = np.array([float(x) for x in ifs.weights])
    return r, t, p


def build_planar_tree(ifs: PlanarIFS, n: int, guard: int = 6, budget: int = DEFAULT_BUDGET) -> TreeMeasure:
    """Depth-``n`` 2-D tree measure by stopping-word atom placement in the rescaled chart."""
    scaled, chart = ifs.rescaled()
    r, t, p = _planar_arrays(scaled)
    x0 = t[0] / (1 - r[0])
    pts, w = stopping_atoms(r, t, p, x0, n + guard, budget=budget)
    return bin_points(pts, w, n, chart=chart)


def planar_attractor_cells(ifs: PlanarIFS, k: int, budget: int = DEFAULT_BUDGET) -> list[DyadicCell]:
    """Depth-``k`` cells hit by the stopping atoms of the rescaled system."""
    scaled, _ = ifs.rescaled()
    r, t, p = _planar_arrays(scaled)
    return attractor_cells(r, t, p, k, budget=budget)


def strip_conditional(mu: TreeMeasure, direction: Direction | float, x: float, w: int) -> TreeMeasure:
    """Normalized restriction of ``mu`` to the strip ``x <= pi_theta < x + 2**-w``, pushed to the orthogonal axis.

    Finest cells are represented by their centres.  The orthogonal
    coordinate ``-x sin(theta) + y cos(theta)`` is mapped affinely onto
    ``[0, 1]`` using its range over the unit square, so ``theta = 0`` returns
    the vertical coordinate unchanged.  The result has the depth of ``mu``.
    """
    if mu.dim != 2:
        raise ValueError("strip conditionals need a 2-D tree measure")
    d = direction if isinstance(direction, Direction) else Direction(direction)
    c, s = (float(v) for v in d.cos_sin())
    n = mu.max_depth
    arr = np.asarray(mu.masses(n))
    centres = (np.arange(1 << n) + 0.5) / (1 << n)
    X, Y = np.meshgrid(centres, centres, indexing="ij")
    proj = X * c + Y * s
    lo, hi = float(x), float(x) + 2.0**-w
    inside = (proj >= lo) & (proj < hi) & (arr > 0)
    total = float(arr[inside].sum())
    if total <= 0:
        raise EmptyComponentError("zero-mass strip")
    orth = -X * s + Y * c
    corners = [-a * s + b * c for a in (0.0, 1.0) for b in (0.0, 1.0)]
    olo, ohi = min(corners), max(corners)
    u = (orth[inside] - olo) / (ohi - olo)
    return bin_points(u, arr[inside] / total, n)
