"""Parameter sweeps of normalized entropy and the branch decomposition of stopping words.

For a parameter ``t0`` and depth ``n`` every stopping word ``I in Lambda_n``
is assigned to the depth-``n`` cell ``Q`` containing its atom
``f_{I,t0}(x0)``.  The cell weights ``a_Q = sum_{I in A_Q} p_I`` then split
the stopping-word entropy by the chain rule::

    sum_I p_I log(1/p_I) = sum_Q a_Q log(1/a_Q)
                           + sum_Q a_Q sum_{I in A_Q} (p_I/a_Q) log(a_Q/p_I)

and the second term (per unit depth) is the branch entropy excess.  The
atoms ``f_{I,t}(0)``, ``I in A_Q``, weighted by ``p_I/a_Q``, form the atom
measure of ``Q`` whose entropy can be evaluated at any parameter ``t``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dyadic import Chart, DyadicCell, cell_of_point, entropy_bits, shannon_entropy
from .exact import QuadraticNumber, is_exact
from .ifs import DEFAULT_BUDGET, WeightedIFS, Word, build_tree_measure, similarity_dimension, stopping_atoms
from .overlaps import exact_overlap_search
from .parametric import ParametricFamily, _horner

__all__ = [
    "EntropyProfile",
    "entropy_profile",
    "BranchDecomposition",
    "branch_decomposition",
    "branch_entropy_excess",
    "stopping_word_entropy",
    "atom_entropy",
    "atom_entropy_table",
    "DipReport",
    "Dip",
    "OverlapWitness",
    "dip_detector",
    "overlap_witnesses",
]


@dataclass
class EntropyProfile:
    """Normalized entropies ``H(mu_t, D_n)/n`` over a parameter grid."""

    params: np.ndarray
    entropy_bits: np.ndarray
    sd: np.ndarray
    depth: int
    guard: int
    family: ParametricFamily | None = field(default=None, repr=False)

    @property
    def normalized(self) -> np.ndarray:
        return self.entropy_bits / self.depth

    @property
    def deficit(self) -> np.ndarray:
        """``min(1, sd) - H/n``."""
        return np.minimum(1.0, self.sd) - self.normalized

    def to_csv(self, threshold: float = 0.02) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "n", "entropy_bits", "normalized", "sd", "deficit", "flagged"])
        for t, h, hn, sd, d in zip(self.params, self.entropy_bits, self.normalized, self.sd, self.deficit):
            w.writerow([repr(float(t)), self.depth, repr(float(h)), repr(float(hn)), repr(float(sd)), repr(float(d)), int(d > threshold)])
        return buf.getvalue()


def _profile_point(args):
    family, t, n, guard, weights, method, budget = args
    ifs = family.at(float(t))
    if weights is not None:
        ifs = WeightedIFS(ifs.maps, tuple(float(p) for p in weights))
    mu = build_tree_measure(ifs, n, guard=guard, method=method, budget=budget)
    return shannon_entropy(mu, n).entropy_bits, similarity_dimension(ifs)


def entropy_profile(
    family: ParametricFamily,
    t_grid: Sequence[float],
    n: int,
    guard: int = 6,
    weights: Sequence[float] | None = None,
    method: str = "auto",
    budget: int = DEFAULT_BUDGET,
    jobs: int = 1,
) -> EntropyProfile:
    """``H(mu_t, D_n)/n`` and ``sd(mu_t)`` for every ``t`` in the grid.

    The values are entropies of depth-``n`` tree approximations, not
    certified dimensions: the true dimension is at least ``H/n - C/n`` for a
    constant ``C`` that is not computed here.  Output order follows the grid
    regardless of ``jobs``.
    """
    grid = np.asarray(t_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty parameter grid")
    tasks = [(family, t, n, guard, weights, method, budget) for t in grid]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_profile_point, tasks))
    else:
        results = [_profile_point(t) for t in tasks]
    h = np.array([r[0] for r in results])
    sd = np.array([r[1] for r in results])
    return EntropyProfile(grid, h, sd, n, guard, family)


# ----------------------------------------------------------------------
# branch decomposition


@dataclass
class BranchCell:
    """One depth-``n`` cell with its words ``A_Q`` and their weights ``p_I``."""

    cell: DyadicCell
    words: list[Word]
    weights: np.ndarray

    @property
    def mass(self) -> float:
        """``a_Q``."""
        return float(self.weights.sum())


@dataclass
class BranchDecomposition:
    depth: int
    t0: object
    cells: list[BranchCell]
    chart: Chart
    ifs: WeightedIFS = field(repr=False)
    family: ParametricFamily | None = field(default=None, repr=False)

    def masses(self) -> np.ndarray:
        return np.array([c.mass for c in self.cells])

    def cell_entropy(self) -> float:
        """``sum_Q a_Q log(1/a_Q)``."""
        return entropy_bits(self.masses())

    def find(self, cell: DyadicCell) -> BranchCell:
        for c in self.cells:
            if c.cell == cell:
                return c
        raise ValueError(f"empty cell {cell}: no stopping word lands there")

    def atoms(self, cell: DyadicCell, t=None) -> tuple[list, np.ndarray]:
        """Atom positions ``f_{I,t}(0)`` (native coordinates) and weights ``p_I/a_Q``."""
        bc = self.find(cell)
        ifs = self.ifs if t is None else self.family.at(t)
        return _word_positions(ifs, bc.words), bc.weights / bc.weights.sum()

    def all_atoms(self, t=None) -> list[list]:
        """Atom positions for every cell, sharing prefix computations across words."""
        ifs = self.ifs if t is None else self.family.at(t)
        cache: dict = {(): (1, 0)}
        return [_word_positions(ifs, c.words, cache) for c in self.cells]


def _word_positions(ifs: WeightedIFS, words: Sequence[Word], cache: dict | None = None) -> list:
    """``f_I(0) = s_I`` for each word, memoizing ``(r, s)`` of every prefix."""
    cache = {(): (1, 0)} if cache is None else cache
    out = []
    for w in words:
        sym = w.symbols
        k = len(sym)
        while sym[:k] not in cache:
            k -= 1
        r, s = cache[sym[:k]]
        for j in range(k, len(sym)):
            f = ifs.maps[sym[j]]
            s = s + r * f.translation
            r = r * f.ratio
            cache[sym[: j + 1]] = (r, s)
        out.append(s)
    return out


def branch_decomposition(
    source: ParametricFamily | WeightedIFS,
    t0=None,
    n: int = 8,
    x0=None,
    weights: Sequence[float] | None = None,
    budget: int = DEFAULT_BUDGET,
) -> BranchDecomposition:
    """Group ``Lambda_n`` by the depth-``n`` cell of ``f_{I,t0}(x0)``.

    Cells are taken in the chart that rescales the attractor hull to
    ``[0, 1]``, the same chart used by :func:`build_tree_measure`; with
    the default ``x0`` (fixed point of the first map) ``sum a_Q log(1/a_Q)``
    equals the entropy of ``build_tree_measure(ifs, n, guard=0)``.
    """
    family = source if isinstance(source, ParametricFamily) else None
    ifs = family.at(t0) if family is not None else source
    if weights is not None:
        ifs = WeightedIFS(ifs.maps, tuple(weights))
    scaled, chart = ifs.rescaled()
    if x0 is None:
        y0 = np.array([float(scaled.maps[0].fixed_point())])
    else:
        y0 = np.array([(float(x0) - float(chart.offset[0])) / float(chart.scale)])
    pts, p, words = stopping_atoms(scaled.ratios, scaled.translations, scaled.probabilities, y0, n, budget=budget, track_words=True)
    side = 1 << n
    idx = np.clip(np.floor(np.ldexp(pts[:, 0], n)).astype(np.int64), 0, side - 1)
    order = np.argsort(idx, kind="stable")
    idx, p = idx[order], p[order]
    words = [words[j] for j in order]
    cells = []
    bounds = np.flatnonzero(np.diff(idx)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [idx.size]])
    for a, b in zip(starts, ends):
        cells.append(BranchCell(DyadicCell(n, (int(idx[a]),)), [Word(w) for w in words[a:b]], p[a:b].copy()))
    return BranchDecomposition(n, t0, cells, chart, ifs, family)


def stopping_word_entropy(dec: BranchDecomposition) -> float:
    """``sum_{I in Lambda_n} p_I log(1/p_I)``."""
    p = np.concatenate([c.weights for c in dec.cells])
    return entropy_bits(p)


def branch_entropy_excess(dec: BranchDecomposition) -> float:
    """``(1/n) sum_Q a_Q sum_{I in A_Q} (p_I/a_Q) log(a_Q/p_I)``."""
    total = 0.0
    for c in dec.cells:
        a = c.weights.sum()
        total += a * entropy_bits(c.weights / a)
    return total / dec.depth


def atom_entropy(dec: BranchDecomposition, cell: DyadicCell, scale_depth: int, t=None) -> float:
    """Entropy in bits of the atom measure of ``cell`` at ``D_{scale_depth}``.

    Positions are evaluated at ``t`` (default ``t0``); exact parameters give
    exact cell assignment at any depth.
    """
    pts, w = dec.atoms(cell, t)
    return _binned_entropy(pts, w, scale_depth)


def atom_entropy_table(dec: BranchDecomposition, scale_depth: int, t=None) -> np.ndarray:
    """:func:`atom_entropy` for every cell of the decomposition, in cell order."""
    out = []
    for c, pts in zip(dec.cells, dec.all_atoms(t)):
        out.append(_binned_entropy(pts, c.weights / c.weights.sum(), scale_depth))
    return np.array(out)


def _binned_entropy(pts, w, scale_depth: int) -> float:
    groups: dict[int, float] = {}
    for x, wi in zip(pts, w):
        key = cell_of_point(x, scale_depth).coords[0]
        groups[key] = groups.get(key, 0.0) + float(wi)
    return entropy_bits(np.array(list(groups.values())))


# ----------------------------------------------------------------------
# dips and overlap witnesses


@dataclass(frozen=True)
class OverlapWitness:
    words: tuple[str, str]
    root: object
    root_value: float

    def to_dict(self) -> dict:
        return {"words": list(self.words), "root": str(self.root), "root_value": self.root_value}


@dataclass(frozen=True)
class Dip:
    index: int
    t: float
    deficit: float
    witness: OverlapWitness | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "t": self.t,
            "deficit": self.deficit,
            "witness": None if self.witness is None else self.witness.to_dict(),
        }


@dataclass
class DipReport:
    threshold: float
    flagged: list[Dip]

    @property
    def indices(self) -> list[int]:
        return [d.index for d in self.flagged]

    def to_json(self) -> str:
        return json.dumps({"threshold": self.threshold, "flagged": [d.to_dict() for d in self.flagged]}, indent=2)


def _poly_words(polys_r, polys_s, word):
    """Coefficient lists of ``r_I(t)`` and ``s_I(t)`` for a polynomial family."""
    r, s = [Fraction(1)], [Fraction(0)]
    for i in word:
        s = _padd(s, _pmul(r, polys_s[i]))
        r = _pmul(r, polys_r[i])
    return r, s


def _pmul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _padd(a, b):
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def _trim(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def _pdivmod(num, den):
    num = list(num)
    q = [Fraction(0)] * max(1, len(num) - len(den) + 1)
    while len(num) >= len(den) and num:
        c = num[-1] / den[-1]
        k = len(num) - len(den)
        q[k] = c
        for j, d in enumerate(den):
            num[k + j] -= c * d
        num = _trim(num)
    return q, num


def _exact_root(poly, rho: float, others: np.ndarray):
    """Exact rational or quadratic root of ``poly`` near ``rho``, or None."""
    cand = Fraction(rho).limit_denominator(10**6)
    if sum(c * cand**k for k, c in enumerate(poly)) == 0:
        return cand
    for other in others:
        if abs(other - rho) < 1e-12 and abs(other.imag) < 1e-12:
            continue
        b = Fraction(-(rho + other).real).limit_denominator(10**6)
        c = Fraction((rho * other).real).limit_denominator(10**6)
        _, rem = _pdivmod(poly, [c, b, Fraction(1)])
        if rem:
            continue
        disc = b * b - 4 * c
        if disc < 0:
            continue
        root_disc = QuadraticNumber.sqrt(disc)
        for sign in (1, -1):
            r = (-b + sign * root_disc) / 2
            if abs(float(r) - rho) < 1e-9:
                return r
    return None


def overlap_witnesses(family: ParametricFamily, interval: tuple[float, float], depth: int = 3) -> list[OverlapWitness]:
    """Parameters in ``interval`` where two words of length ``<= depth`` define the same map.

    Candidate parameters are real roots of ``s_I(t) - s_J(t)`` for word
    pairs with identical ``r_I(t)``.  Roots that are rational or quadratic
    irrational are reconstructed exactly and confirmed with
    :func:`exact_overlap_search`; others are dropped.  One witness per root,
    the shortest and lexicographically first pair.
    """
    if not family.polynomial:
        raise TypeError("exact arithmetic required: witness search needs a polynomial family")
    rp = [[Fraction(c) for c in p] for p in family.ratio_polys]
    sp = [[Fraction(c) for c in p] for p in family.translation_polys]
    m = family.size
    found: dict = {}
    for length in range(1, depth + 1):
        words = [tuple(int(c) for c in np.unravel_index(k, (m,) * length)) for k in range(m**length)]
        data = {w: _poly_words(rp, sp, w) for w in words}
        for a in range(len(words)):
            for b in range(a + 1, len(words)):
                I, J = words[a], words[b]
                if I[0] == J[0]:
                    continue
                (rI, sI), (rJ, sJ) = data[I], data[J]
                if _trim(rI) != _trim(rJ):
                    continue
                diff = _trim(_padd(sI, [-c for c in sJ]))
                if len(diff) < 2:
                    continue
                roots = np.roots([float(c) for c in reversed(diff)])
                for rho in roots:
                    if abs(rho.imag) > 1e-9 or not interval[0] <= rho.real <= interval[1]:
                        continue
                    exact = _exact_root(diff, float(rho.real), roots)
                    if exact is None or exact in found:
                        continue
                    hits = exact_overlap_search(family.at(exact), length)
                    pair = (Word(I), Word(J))
                    if pair in hits or (pair[1], pair[0]) in hits:
                        found[exact] = OverlapWitness((str(pair[0]), str(pair[1])), exact, float(exact))
    return sorted(found.values(), key=lambda w: w.root_value)


def dip_detector(
    profile: EntropyProfile,
    threshold: float = 0.02,
    family: ParametricFamily | None = None,
    witness_depth: int = 3,
) -> DipReport:
    """Flag grid points with ``min(1, sd) - H/n > threshold``, largest deficit first.

    When the family is polynomial, each flag is matched to the nearest
    exact-overlap parameter within one grid step.
    """
    if profile.params.size == 0:
        raise ValueError("empty profile")
    family = family if family is not None else profile.family
    deficit = profile.deficit
    idx = [int(i) for i in np.flatnonzero(deficit > threshold)]
    idx.sort(key=lambda i: (-deficit[i], i))
    witnesses: list[OverlapWitness] = []
    if family is not None and family.polynomial and idx:
        step = float(np.max(np.diff(profile.params))) if profile.params.size > 1 else 0.0
        lo, hi = float(profile.params.min()) - step, float(profile.params.max()) + step
        witnesses = overlap_witnesses(family, (lo, hi), witness_depth)
    flags = []
    for i in idx:
        t = float(profile.params[i])
        best = None
        if witnesses:
            step = float(np.max(np.abs(np.diff(profile.params)))) if profile.params.size > 1 else 0.0
            near = min(witnesses, key=lambda w: abs(w.root_value - t))
            if abs(near.root_value - t) <= step:
                best = near
        flags.append(Dip(i, t, float(deficit[i]), best))
    return DipReport(threshold, flags)


def profile_from_values(params, normalized, sd, depth: int = 1) -> EntropyProfile:
    """Wrap precomputed normalized entropies (and ``sd`` values) as a profile."""
    params = np.asarray(params, dtype=float)
    normalized = np.asarray(normalized, dtype=float)
    sd = np.broadcast_to(np.asarray(sd, dtype=float), params.shape).copy()
    return EntropyProfile(params, normalized * depth, sd, depth, 0)
