"""Exact combinatorics of finite subsets of the dyadic grid ``2**-n Z``.

A :class:`GridSet` stores membership as the bits of a Python integer, bit
``j`` standing for the point ``j / 2**n``.  Sums of points of ``[0, 1]``
land in ``[0, 2]``, so the ambient grid is ``[0, 2] ∩ 2**-n Z``.

The module provides

* unions of translates ``∪_a (a + B_a)`` and additive energy,
* tree regularization: a union of deep cells on which the measure has a
  constant branching ratio per block of ``T`` levels,
* the porosity witness measure, which turns "one surviving child at many
  scales" into an upper bound on the mass of a set,
* the grid entropy-increase experiment with machine-checked hypotheses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from .dyadic import DyadicCell, TreeMeasure, _blocks
from .errors import HypothesisError, ResolutionError

__all__ = [
    "GridSet",
    "GrowthReport",
    "translate_union",
    "additive_energy",
    "EnergyBridge",
    "energy_bridge",
    "RegularizationResult",
    "regularize",
    "verify_regularization",
    "PorosityWitness",
    "porosity_witness",
    "HypothesisChecks",
    "ExperimentResult",
    "entropy_increase_experiment",
    "preset_experiment",
    "adversarial_search",
    "digit_measure",
    "PRESETS",
]


# ----------------------------------------------------------------------
# grid sets
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class GridSet:
    """A finite subset of ``[0, 2] ∩ 2**-n Z`` stored as a bitmask.

    Parameters
    ----------
    n : int
        Resolution; bit ``j`` of ``bits`` is the point ``j / 2**n``.
    bits : int
        Membership mask.
    """

    n: int
    bits: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("resolution must be nonnegative")
        if self.bits < 0:
            raise ValueError("bitmask must be nonnegative")
        if self.bits >> ((2 << self.n) + 1):
            raise ValueError("points must lie in [0, 2]")

    # constructors -----------------------------------------------------
    @classmethod
    def from_indices(cls, n: int, indices) -> GridSet:
        bits = 0
        for j in indices:
            j = int(j)
            if j < 0:
                raise ValueError("grid indices must be nonnegative")
            bits |= 1 << j
        return cls(n, bits)

    @classmethod
    def from_values(cls, n: int, values) -> GridSet:
        """Points given as exact rationals (or floats that sit exactly on the grid)."""
        idx = []
        for v in values:
            q = Fraction(v) * (1 << n)
            if q.denominator != 1:
                raise ValueError(f"{v} is not on the 2^-{n} grid")
            idx.append(int(q))
        return cls.from_indices(n, idx)

    @classmethod
    def interval(cls, n: int, start: int, stop: int) -> GridSet:
        """Indices ``start <= j < stop``."""
        if stop <= start:
            return cls(n, 0)
        return cls(n, ((1 << (stop - start)) - 1) << start)

    @classmethod
    def full(cls, n: int, include_one: bool = False) -> GridSet:
        """All grid points of ``[0, 1)`` (or ``[0, 1]`` with ``include_one``)."""
        return cls.interval(n, 0, (1 << n) + int(include_one))

    @classmethod
    def progression(cls, n: int, start: int, step: int, length: int) -> GridSet:
        return cls.from_indices(n, range(start, start + step * length, step))

    # access -----------------------------------------------------------
    def __len__(self) -> int:
        return self.bits.bit_count()

    def __contains__(self, j: int) -> bool:
        return j >= 0 and bool(self.bits >> j & 1)

    def indices(self) -> np.ndarray:
        """Sorted member indices."""
        out = []
        b = self.bits
        while b:
            low = b & -b
            j = low.bit_length() - 1
            out.append(j)
            b ^= low
        return np.array(out, dtype=np.int64)

    def values(self) -> list[Fraction]:
        return [Fraction(int(j), 1 << self.n) for j in self.indices()]

    def indicator(self, length: int | None = None) -> np.ndarray:
        """0/1 vector over indices ``0..length-1``."""
        length = self.bits.bit_length() if length is None else length
        out = np.zeros(length, dtype=np.int64)
        idx = self.indices()
        out[idx[idx < length]] = 1
        return out

    def shifted(self, j: int) -> GridSet:
        return GridSet(self.n, self.bits << j)

    def _check(self, other: GridSet) -> None:
        if self.n != other.n:
            raise ValueError(f"resolution mismatch: {self.n} vs {other.n}")

    def __or__(self, other: GridSet) -> GridSet:
        self._check(other)
        return GridSet(self.n, self.bits | other.bits)

    def __and__(self, other: GridSet) -> GridSet:
        self._check(other)
        return GridSet(self.n, self.bits & other.bits)

    def issubset(self, other: GridSet) -> bool:
        self._check(other)
        return self.bits & ~other.bits == 0


# ----------------------------------------------------------------------
# unions of translates and energy
# ----------------------------------------------------------------------

def _fiber(B_map, a: int) -> GridSet:
    if isinstance(B_map, GridSet):
        return B_map
    if callable(B_map):
        return B_map(a)
    return B_map[a]


@dataclass(frozen=True)
class GrowthReport:
    """Cardinalities of the sets in a union of translates.

    ``fiber_sizes[i]`` is ``|B_a|`` for the ``i``-th element of ``A`` in
    increasing order; ``exponent`` is ``log|union| / log|B|`` (NaN when
    ``|B| <= 1``).
    """

    size_A: int
    size_B: int
    fiber_sizes: tuple[int, ...]
    union_size: int
    exponent: float

    def to_dict(self) -> dict:
        return {
            "size_A": self.size_A,
            "size_B": self.size_B,
            "fiber_sizes": list(self.fiber_sizes),
            "union_size": self.union_size,
            "exponent": self.exponent,
        }


def translate_union(A: GridSet, B_map, B: GridSet | None = None) -> tuple[GrowthReport, GridSet]:
    """Exact ``∪_{a in A} (a + B_a)`` by OR-ing shifted bitmasks.

    Parameters
    ----------
    A : GridSet
    B_map : GridSet, mapping or callable
        ``B_a`` per grid index ``a`` of ``A`` (a single set means ``B_a = B``).
    B : GridSet, optional
        The reference set whose size sets the exponent; defaults to the
        union of the fibers.

    Returns
    -------
    report, union : GrowthReport, GridSet
    """
    bits = 0
    fibers_union = 0
    sizes = []
    for a in A.indices():
        a = int(a)
        fb = _fiber(B_map, a)
        A._check(fb)
        bits |= fb.bits << a
        fibers_union |= fb.bits
        sizes.append(len(fb))
    if B is None:
        B = GridSet(A.n, fibers_union)
    else:
        A._check(B)
    union = GridSet(A.n, bits) if bits >> ((2 << A.n) + 1) == 0 else _wide(A.n, bits)
    u = bits.bit_count()
    nb = len(B)
    exponent = math.log(u) / math.log(nb) if nb > 1 and u > 0 else float("nan")
    return GrowthReport(len(A), nb, tuple(sizes), u, exponent), union


def _wide(n: int, bits: int) -> GridSet:
    # fibers outside [0, 1] can push sums past 2; keep the count, drop the range check
    obj = object.__new__(GridSet)
    object.__setattr__(obj, "n", n)
    object.__setattr__(obj, "bits", bits)
    return obj


def additive_energy(A: GridSet, B: GridSet) -> int:
    """``|{(a1, a2, b1, b2) : a1 + b1 = a2 + b2}|`` as ``sum_s r(s)**2``.

    ``r`` is the convolution of the indicator vectors, i.e. the number of
    representations of each sum.
    """
    A._check(B)
    if not len(A) or not len(B):
        return 0
    r = np.convolve(A.indicator(), B.indicator())
    return int(np.dot(r, r))


@dataclass(frozen=True)
class EnergyBridge:
    """Energy lower bounds implied by a popular-sum graph ``G = {(a, b) : b in B_a}``.

    ``graph_size`` is ``|G|`` and ``sumset_size`` is ``|{a + b : (a, b) in G}|``.
    Cauchy–Schwarz gives ``energy >= graph_size**2 / sumset_size``; under
    ``|G| >= L**-delta |A||B|`` and ``|sums| <= L**delta |A|`` this is at least
    ``L**(-3 delta) |A| |B|**2``.  ``stated_bound`` is the sharper
    ``L**(-2 delta) |A| |B|**2``, which is reported but not implied.
    """

    energy: int
    graph_size: int
    sumset_size: int
    L: float
    delta: float
    hypotheses: bool
    cauchy_schwarz_bound: float
    implied_bound: float
    stated_bound: float

    @property
    def cauchy_schwarz_holds(self) -> bool:
        return self.energy * self.sumset_size >= self.graph_size**2

    @property
    def implied_holds(self) -> bool:
        return (not self.hypotheses) or self.energy >= self.implied_bound * (1 - 1e-12)

    @property
    def stated_holds(self) -> bool:
        return self.energy >= self.stated_bound * (1 - 1e-12)


def energy_bridge(A: GridSet, B: GridSet, B_map, L: float, delta: float) -> EnergyBridge:
    """Check the energy precondition of the asymmetric Balog–Szemerédi–Gowers theorem."""
    report, union = translate_union(A, B_map, B)
    g = sum(report.fiber_sizes)
    s = report.union_size
    na, nb = len(A), len(B)
    hyp = na <= L * nb and g >= L**-delta * na * nb and s <= L**delta * na
    return EnergyBridge(
        energy=additive_energy(A, B),
        graph_size=g,
        sumset_size=s,
        L=float(L),
        delta=float(delta),
        hypotheses=bool(hyp),
        cauchy_schwarz_bound=g * g / s if s else 0.0,
        implied_bound=L ** (-3 * delta) * na * nb * nb,
        stated_bound=L ** (-2 * delta) * na * nb * nb,
    )


# ----------------------------------------------------------------------
# regularization
# ----------------------------------------------------------------------
def _exact_integers(arr: np.ndarray) -> tuple[np.ndarray, int]:
    """Integers ``M`` and an exponent ``e`` with ``arr == M * 2**e`` exactly."""
    flat = np.asarray(arr, dtype=float).ravel()
    mant, ex = np.frexp(flat)
    imant = (mant * 2.0**53).astype(np.int64)
    ex = ex.astype(np.int64) - 53
    pos = imant != 0
    emin = int(ex[pos].min()) if pos.any() else 0
    out = np.empty(flat.size, dtype=object)
    for i in range(flat.size):
        out[i] = int(imant[i]) << int(ex[i] - emin) if imant[i] else 0
    return out.reshape(arr.shape), emin


def _coarsen_to(arr: np.ndarray, depth: int, target: int) -> np.ndarray:
    d = arr.ndim
    r = depth - target
    shape = []
    for _ in range(d):
        shape += [1 << target, 1 << r]
    return arr.reshape(shape).sum(axis=tuple(range(1, 2 * d, 2)))


def _unblocks(rows: np.ndarray, coarse: int, fine: int, d: int) -> np.ndarray:
    r = fine - coarse
    shape = [1 << coarse] * d + [1 << r] * d
    arr = rows.reshape(shape)
    order = []
    for i in range(d):
        order += [i, d + i]
    return arr.transpose(order).reshape((1 << fine,) * d)


def _upsample(arr: np.ndarray, factor_log: int) -> np.ndarray:
    for ax in range(arr.ndim):
        arr = np.repeat(arr, 1 << factor_log, axis=ax)
    return arr


@dataclass(frozen=True)
class RegularizationResult:
    """Output of :func:`regularize`.

    Attributes
    ----------
    block : int
        Levels per block (``T``).
    levels : int
        Number of blocks (``l``); selected cells live at depth ``levels * block``.
    mask : numpy.ndarray
        Boolean array over depth-``levels*block`` cells marking the selection.
    ratios : tuple of Fraction
        Common branching ratio ``c_i`` per block, ``i = 1..levels``: every
        surviving block-``i`` cell carries between ``c_i/2`` and ``c_i`` of its
        block parent's retained mass.
    exponents : tuple of float
        ``-log2(c_i) / block``, each in ``[0, dim]``.
    retained : Fraction
        Exact retained mass fraction ``mu(X) / mu(total)``.
    """

    block: int
    levels: int
    dim: int
    mask: np.ndarray
    ratios: tuple[Fraction, ...]
    exponents: tuple[float, ...]
    retained: Fraction

    @property
    def retained_mass(self) -> float:
        return float(self.retained)

    @property
    def mass_floor(self) -> Fraction:
        return Fraction(1, (2 * self.block * self.dim + 2) ** self.levels)

    def cells(self) -> list[DyadicCell]:
        depth = self.block * self.levels
        return [DyadicCell(depth, tuple(int(c) for c in idx)) for idx in zip(*np.nonzero(self.mask))]


def _row_windows(C: int) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.triu_indices(C)
    return i, j


def _select_level(rows_f: np.ndarray, rows_x: np.ndarray, max_candidates: int | None):
    """Pick a common ratio and one contiguous (in sorted order) window per parent.

    Returns ``(keep_rows, ratio)`` with ``keep_rows`` boolean like ``rows_f``.
    """
    P, C = rows_f.shape
    order = np.argsort(-rows_f, axis=1, kind="stable")
    S = np.take_along_axis(rows_f, order, axis=1)
    cs = np.concatenate([np.zeros((P, 1)), np.cumsum(S, axis=1)], axis=1)
    wi, wj = _row_windows(C)
    tot = cs[:, wj + 1] - cs[:, wi]
    valid = S[:, wj] > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.where(valid, S[:, wi] / tot, np.inf)
        hi = np.where(valid, 2 * S[:, wj] / tot, -np.inf)
    # candidate ratios are left ends of window intervals; c = 1 is always feasible
    cand_p, cand_w = np.nonzero(valid)
    cand_val = lo[cand_p, cand_w]
    _, first = np.unique(cand_val, return_index=True)
    cand_p, cand_w, cand_val = cand_p[first], cand_w[first], cand_val[first]
    if max_candidates is not None and cand_val.size > max_candidates:
        pick = np.unique(np.linspace(0, cand_val.size - 1, max_candidates).round().astype(int))
        cand_p, cand_w, cand_val = cand_p[pick], cand_w[pick], cand_val[pick]
    slack = 1e-9
    best = None
    scored = []
    for p, w, c in zip(cand_p, cand_w, cand_val):
        ok = (lo <= c * (1 + slack)) & (hi >= c * (1 - slack))
        score = float(np.where(ok, tot, 0.0).max(axis=1).sum())
        scored.append((score, int(p), int(w)))
    scored.sort(key=lambda t: -t[0])

    def exact_pass(ratio: Fraction, loose: bool):
        cn, cd = ratio.numerator, ratio.denominator
        keep = np.zeros((P, C), dtype=bool)
        kept = 0
        c = float(ratio)
        for p in range(P):
            if loose:
                ok = (lo[p] <= c * (1 + slack)) & (hi[p] >= c * (1 - slack))
                cands = np.nonzero(ok)[0]
            else:
                cands = np.nonzero(valid[p])[0]
            cands = cands[np.argsort(-tot[p, cands], kind="stable")]
            for w in cands:
                i, j = int(wi[w]), int(wj[w])
                members = order[p, i : j + 1]
                vals = [rows_x[p, m] for m in members]
                total = sum(vals)
                if max(vals) * cd <= cn * total and cn * total <= 2 * min(vals) * cd:
                    keep[p, members] = True
                    kept += total
                    break
        return keep, kept

    # c = 1 (heaviest child per parent) is the fallback
    base_keep, base_kept = exact_pass(Fraction(1), loose=False)
    best = (base_kept, base_keep, Fraction(1))
    for score, p, w in scored[:4]:
        i, j = int(wi[w]), int(wj[w])
        members = order[p, i : j + 1]
        ratio = Fraction(rows_x[p, members[0]], sum(rows_x[p, m] for m in members))
        keep, kept = exact_pass(ratio, loose=True)
        if kept > best[0]:
            best = (kept, keep, ratio)
    return best[1], best[2]


def regularize(mu: TreeMeasure, T: int, l: int, max_candidates: int | None = 64) -> RegularizationResult:
    """Select a union ``X`` of depth-``l*T`` cells with constant branching per block.

    Works bottom-up: for each block (deepest first) a common ratio ``c`` is
    chosen, and under each parent cell the largest run of children (sorted
    by mass) whose shares of the run's mass all lie in ``[c/2, c]`` is
    kept.  The ratio maximizes retained mass among candidate values that
    always include ``c = 1`` (keep the heaviest child).  Both output
    properties are then verified in exact integer arithmetic by
    :func:`verify_regularization`.

    Parameters
    ----------
    mu : TreeMeasure
        Any dimension; need ``l*T <= mu.max_depth``.
    T, l : int
        Block length and number of blocks.
    max_candidates : int or None
        Cap on the candidate ratios scored per block (``None`` scores all).

    Raises
    ------
    ResolutionError
        ``l*T`` exceeds the tree depth.
    RuntimeError
        The retained mass misses ``(2Td+2)**-l`` (cannot happen when
        ``T*dim <= 3``, where keeping the heaviest child already suffices).
    """
    if T < 1 or l < 1:
        raise ValueError("T and l must be positive")
    depth = T * l
    if depth > mu.max_depth:
        raise ResolutionError(depth, mu.max_depth)
    if mu.total_mass <= 0:
        raise ValueError("measure has no mass")
    d = mu.dim
    fine_f = np.asarray(mu.masses(depth), dtype=float)
    fine_x, _ = _exact_integers(fine_f)
    keep = fine_f > 0
    ratios: list[Fraction] = [Fraction(1)] * l
    for i in range(l, 0, -1):
        kept_f = np.where(keep, fine_f, 0.0)
        kept_x = np.where(keep, fine_x, 0)
        child_f = _coarsen_to(kept_f, depth, i * T)
        child_x = _coarsen_to(kept_x, depth, i * T) if i * T < depth else kept_x
        rows_f = _blocks(child_f, (i - 1) * T, i * T)
        rows_x = _blocks(child_x, (i - 1) * T, i * T)
        keep_rows, ratio = _select_level(rows_f, rows_x, max_candidates)
        ratios[i - 1] = ratio
        child_keep = _unblocks(keep_rows, (i - 1) * T, i * T, d)
        keep &= _upsample(child_keep, depth - i * T)
    total_x = sum(fine_x.ravel().tolist())
    retained = Fraction(sum(np.where(keep, fine_x, 0).ravel().tolist()), total_x)
    mask = keep.copy()
    mask.setflags(write=False)
    result = RegularizationResult(
        block=T,
        levels=l,
        dim=d,
        mask=mask,
        ratios=tuple(ratios),
        exponents=tuple(-math.log2(r) / T if r != 1 else 0.0 for r in ratios),
        retained=retained,
    )
    problems = verify_regularization(mu, result)
    if problems and max_candidates is not None:
        return regularize(mu, T, l, max_candidates=None)
    if problems:
        raise RuntimeError("regularization postcondition failed: " + problems[0])
    return result


def verify_regularization(mu: TreeMeasure, result: RegularizationResult) -> list[str]:
    """Exact check of both output properties; returns a list of violations (empty if none).

    1. ``mu(X) >= (2Td+2)**-l * mu(total)``.
    2. For each block ``i`` and depth-``iT`` cell ``Q`` with
       ``mu|X(Q) > 0``: ``mu|X(Q) <= c_i * mu|X(parent) <= 2 mu|X(Q)``, the
       parent being the depth-``(i-1)T`` cell above ``Q``.
    """
    T, l, d = result.block, result.levels, result.dim
    depth = T * l
    fine_x, _ = _exact_integers(np.asarray(mu.masses(depth), dtype=float))
    kept = np.where(result.mask, fine_x, 0)
    total = sum(fine_x.ravel().tolist())
    problems = []
    kept_total = sum(kept.ravel().tolist())
    if kept_total * (2 * T * d + 2) ** l < total:
        problems.append(f"retained mass {float(Fraction(kept_total, total)):.6g} below (2Td+2)^-l")
    for i in range(1, l + 1):
        c = result.ratios[i - 1]
        if not (Fraction(1, 1 << (d * T)) <= c <= 1):
            problems.append(f"block {i}: ratio {c} outside [2^-dT, 1]")
        child = _coarsen_to(kept, depth, i * T) if i * T < depth else kept
        rows = _blocks(child, (i - 1) * T, i * T)
        cn, cd = c.numerator, c.denominator
        for p in range(rows.shape[0]):
            parent = sum(rows[p].tolist())
            for q in rows[p]:
                if q and not (q * cd <= cn * parent <= 2 * q * cd):
                    problems.append(f"block {i}: parent {p} child share {Fraction(q, parent)} vs ratio {c}")
                    break
    return problems


# ----------------------------------------------------------------------
# porosity witness
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class PorosityWitness:
    """Witness measure ``nu`` and the mass bound it certifies.

    Attributes
    ----------
    nu : TreeMeasure
        Probability measure supported on the depth-``n`` cells meeting ``D``.
    bound : float
        ``tau ** (n * rho)``, an upper bound for ``mu(D)``.
    rho : float
        ``min_x (disjoint good windows at x) / n``.
    mass_D : float
        ``mu`` of the union of the depth-``n`` cells meeting ``D``, summed directly.
    windows : tuple of int
        Disjoint good windows per point of ``D`` (increasing index order).
    """

    nu: TreeMeasure
    bound: float
    rho: float
    mass_D: float
    windows: tuple[int, ...]

    def __iter__(self):
        yield self.nu
        yield self.bound


def porosity_witness(mu: TreeMeasure, D: GridSet, n: int, l: int, tau: float, gamma: float) -> PorosityWitness:
    """Build the witness measure for a set that keeps a single child at many scales.

    A scale ``k`` (``1 <= k <= n-l``) is *decaying* at ``x`` when
    ``mu(D_{k+l}(x)) <= tau * mu(D_k(x))`` and *single* when exactly one
    depth-``(k+l)`` cell inside ``D_k(x)`` meets ``D``.  Hypotheses, per
    point ``x`` of ``D``: at least ``n(1 - gamma/2)`` decaying scales and at
    least ``n*gamma`` single scales.

    ``nu`` pushes mass down the tree, splitting each cell among its children
    that meet ``D`` in proportion to ``mu``.  Along the path of ``x`` the
    ratio ``nu/mu`` then gains a factor ``1/a`` per level, ``a`` the share of
    ``mu`` kept, and a window that is both decaying and single multiplies
    it by at least ``1/tau``.  Greedily chosen disjoint windows give
    ``nu(D_n(x)) >= mu(D_n(x)) * tau**(-n rho)``, which is verified
    pointwise, and summing over ``D`` gives ``mu(D) <= tau**(n rho)``.

    Raises
    ------
    HypothesisError
        Naming the first point (and its first failing scale) that violates
        a hypothesis.
    """
    if mu.dim != 1:
        raise ValueError("porosity witness needs a 1-D tree")
    if D.n != n:
        raise ValueError(f"resolution mismatch: set at {D.n}, n = {n}")
    if n > mu.max_depth:
        raise ResolutionError(n, mu.max_depth)
    if not 1 <= l < n:
        raise ValueError("need 1 <= l < n")
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    pts = D.indices()
    if pts.size == 0:
        raise ValueError("empty set")
    if pts[-1] >= 1 << n:
        raise ValueError("points must lie in [0, 1)")
    masses = [np.asarray(mu.masses(k), dtype=float) for k in range(n + 1)]
    meets = []
    for k in range(n + 1):
        m = np.zeros(1 << k, dtype=bool)
        m[np.unique(pts >> (n - k))] = True
        meets.append(m)
    ks = np.arange(1, n - l + 1)
    decay = np.zeros((pts.size, ks.size), dtype=bool)
    single = np.zeros((pts.size, ks.size), dtype=bool)
    for col, k in enumerate(ks):
        here = pts >> (n - k)
        below = pts >> (n - k - l)
        decay[:, col] = masses[k + l][below] <= tau * masses[k][here]
        counts = np.bincount(np.nonzero(meets[k + l])[0] >> l, minlength=1 << k)
        single[:, col] = counts[here] == 1
    need_decay = n * (1 - gamma / 2)
    need_single = n * gamma
    for name, table, need in (("mass-decay", decay, need_decay), ("single-child", single, need_single)):
        cnt = table.sum(axis=1)
        bad = np.nonzero(cnt < need)[0]
        if bad.size:
            p = int(bad[0])
            first_scale = int(ks[np.argmin(table[p])]) if not table[p].all() else None
            raise HypothesisError(
                f"{name} hypothesis fails at x = {int(pts[p])}/2^{n}: "
                f"{int(cnt[p])} good scales < {need:g} required (first failing scale k = {first_scale})"
            )
    # witness measure
    nu = np.ones(1)
    for k in range(n):
        child_mu = masses[k + 1].reshape(-1, 2) * meets[k + 1].reshape(-1, 2)
        share = child_mu.sum(axis=1, keepdims=True)
        cnt = meets[k + 1].reshape(-1, 2).sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            split = np.where(share > 0, child_mu / share, np.where(cnt > 0, meets[k + 1].reshape(-1, 2) / cnt, 0.0))
        nu = (nu[:, None] * split).ravel()
    nu_tree = TreeMeasure(nu)
    # disjoint good windows per point
    good = decay & single
    windows = []
    for p in range(pts.size):
        count, free_from = 0, 1
        for col in np.nonzero(good[p])[0]:
            k = int(ks[col])
            if k >= free_from:
                count += 1
                free_from = k + l
        windows.append(count)
    rho = min(windows) / n
    bound = tau ** (n * rho)
    pointwise = tau ** (-n * rho)
    mu_pts = masses[n][pts]
    nu_pts = nu[pts]
    if np.any(nu_pts < mu_pts * pointwise * (1 - 1e-9)):
        raise RuntimeError("pointwise witness bound failed")
    mass_D = float(mu_pts.sum())
    return PorosityWitness(nu_tree, bound, rho, mass_D, tuple(windows))


# ----------------------------------------------------------------------
# entropy-increase experiment
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class HypothesisChecks:
    """Per-hypothesis outcomes of the grid entropy-increase experiment."""

    eta_mass: bool
    spreading: bool
    b_size: bool
    fiber_size: bool
    eta_of_A: float
    spreading_failures: int
    first_spreading_failure: int | None

    @property
    def all_hold(self) -> bool:
        return self.eta_mass and self.spreading and self.b_size and self.fiber_size

    def to_dict(self) -> dict:
        return {
            "eta_mass": self.eta_mass,
            "spreading": self.spreading,
            "b_size": self.b_size,
            "fiber_size": self.fiber_size,
            "all_hold": self.all_hold,
            "eta_of_A": self.eta_of_A,
            "spreading_failures": self.spreading_failures,
            "first_spreading_failure": self.first_spreading_failure,
        }


@dataclass(frozen=True)
class ExperimentResult:
    """Hypothesis checks of one experiment together with its growth report."""

    n: int
    gamma: float
    l: int
    delta: float
    checks: HypothesisChecks
    report: GrowthReport
    growth: bool
    label: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def empirical_delta(self) -> float:
        """Largest ``delta`` with ``|union| >= |B|**(1+delta)``."""
        return self.report.exponent - 1

    def to_dict(self) -> dict:
        out = {
            "label": self.label,
            "n": self.n,
            "gamma": self.gamma,
            "l": self.l,
            "delta": self.delta,
            "hypotheses": self.checks.to_dict(),
            "growth": self.report.to_dict(),
            "verdict": "growth" if self.growth else "no growth",
            "empirical_delta": self.empirical_delta,
        }
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _grid_masses(eta: TreeMeasure, n: int, k: int) -> np.ndarray:
    # eta is read as a measure on grid points: the mass of [j, j+1)/2^n sits at j/2^n
    return np.asarray(eta.masses(min(k, n)), dtype=float)


def entropy_increase_experiment(
    eta: TreeMeasure,
    A: GridSet,
    B: GridSet,
    B_map,
    gamma: float = 0.25,
    l: int = 2,
    delta: float = 0.1,
    label: str = "",
) -> ExperimentResult:
    """Check the growth hypotheses, then count ``∪_a (a + B_a)`` exactly.

    ``eta`` is a 1-D tree of depth at least ``n`` read as a measure on the
    grid points of ``[0, 1)`` (each depth-``n`` cell's mass sits at its left
    end).  Hypotheses:

    * ``eta(A) >= 1/2``;
    * for every ``x`` in ``A``, at least ``(1 - gamma/2) n`` scales
      ``1 <= k <= n`` with ``eta(D_k(x)) >= 2 eta(D_{k+l}(x))``;
    * ``|B| <= 2**(n (1 - gamma))``;
    * ``|B_a| >= |B|**(1 - delta)`` for every ``a`` in ``A``.

    Violations are recorded, not raised.  The verdict is
    ``|union| >= |B|**(1 + delta)``.
    """
    n = A.n
    A._check(B)
    if eta.dim != 1:
        raise ValueError("eta must be 1-D")
    if eta.max_depth < n:
        raise ResolutionError(n, eta.max_depth)
    a_idx = A.indices()
    inside = a_idx[a_idx < (1 << n)]
    eta_A = float(_grid_masses(eta, n, n)[inside].sum())
    fails = 0
    first = None
    need = (1 - gamma / 2) * n
    for a in a_idx:
        a = int(a)
        good = 0
        if a < 1 << n:
            for k in range(1, n + 1):
                up = _grid_masses(eta, n, k)[a >> (n - k)]
                down = _grid_masses(eta, n, k + l)[a >> max(n - k - l, 0)] if k + l <= n else _grid_masses(eta, n, n)[a]
                if up >= 2 * down:
                    good += 1
        if good < need:
            fails += 1
            if first is None:
                first = a
    report, _ = translate_union(A, B_map, B)
    nb = len(B)
    fiber_ok = all(s >= nb ** (1 - delta) * (1 - 1e-12) for s in report.fiber_sizes)
    checks = HypothesisChecks(
        eta_mass=eta_A >= 0.5 - 1e-12,
        spreading=fails == 0,
        b_size=nb <= 2 ** (n * (1 - gamma)),
        fiber_size=fiber_ok,
        eta_of_A=eta_A,
        spreading_failures=fails,
        first_spreading_failure=first,
    )
    growth = report.union_size >= nb ** (1 + delta)
    return ExperimentResult(n, gamma, l, delta, checks, report, bool(growth), label)


def digit_measure(n: int, base_log: int, digits) -> TreeMeasure:
    """Uniform measure on numbers whose base-``2**base_log`` digits lie in ``digits``.

    Depth ``n`` must be a multiple of ``base_log``.
    """
    if n % base_log:
        raise ValueError("depth must be a multiple of the digit length")
    digits = sorted(set(int(x) for x in digits))
    cells = np.array([0], dtype=np.int64)
    for _ in range(n // base_log):
        cells = (cells[:, None] * (1 << base_log) + np.array(digits)[None, :]).ravel()
    arr = np.zeros(1 << n)
    arr[cells] = 1.0 / cells.size
    return TreeMeasure(arr)


def _preset_positive(n: int, gamma: float, l: int, delta: float) -> ExperimentResult:
    eta = TreeMeasure.uniform(n)
    A = GridSet.full(n)
    B = GridSet.interval(n, 0, 1 << (n // 2))
    return entropy_increase_experiment(eta, A, B, B, gamma, l, delta, label="positive")


def _preset_failed(n: int, gamma: float, l: int, delta: float) -> ExperimentResult:
    eta = TreeMeasure.dirac(0.0, n)
    A = GridSet.from_indices(n, [0])
    B = GridSet.interval(n, 0, 1 << (n // 2))
    return entropy_increase_experiment(eta, A, B, B, gamma, l, delta, label="failed")


PRESETS = {"positive": _preset_positive, "failed": _preset_failed}


def preset_experiment(name: str, n: int = 12, gamma: float = 0.25, l: int = 2, delta: float = 0.1) -> ExperimentResult:
    """Run a named experiment (``positive`` or ``failed``)."""
    try:
        fn = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; known: {sorted(PRESETS)} and 'adversarial'") from None
    return fn(n, gamma, l, delta)


def _greedy_fibers(A: GridSet, B_idx: np.ndarray, size: int) -> dict[int, GridSet]:
    """Per ``a`` (increasing), the run of ``size`` consecutive terms of ``B`` that adds fewest new sums."""
    n = A.n
    windows = []
    for s in range(len(B_idx) - size + 1):
        windows.append(GridSet.from_indices(n, B_idx[s : s + size]).bits)
    union = 0
    fibers = {}
    for a in A.indices():
        a = int(a)
        best_bits, best_cnt = None, None
        for w in windows:
            cnt = (union | (w << a)).bit_count()
            if best_cnt is None or cnt < best_cnt:
                best_bits, best_cnt = w, cnt
        union |= best_bits << a
        fibers[a] = GridSet(n, best_bits)
    return fibers


def adversarial_search(
    n: int = 8,
    gamma: float = 0.25,
    l: int = 2,
    delta: float = 0.1,
    steps=(1, 2, 3, 4, 8),
    lengths=(4, 8, 16, 32, 64),
) -> dict:
    """Greedy search for small unions when ``B`` is an arithmetic progression.

    Two grid measures are tried: uniform on all of ``[0, 1)`` and uniform
    on the base-4 digit-{0,1} set (which halves every two levels).  ``A``
    is the support, ``B = {0, step, ..., (length-1) step}`` and each
    ``B_a`` is the run of ``ceil(|B|**(1-delta))`` consecutive terms chosen
    greedily to add the fewest new sums.

    Returns a JSON-ready record of every instance and the smallest exponent
    among instances whose hypotheses all hold.
    """
    measures = {"uniform": TreeMeasure.uniform(n)}
    if n % 2 == 0:
        measures["base4-digits-01"] = digit_measure(n, 2, (0, 1))
    rows = []
    for name, eta in measures.items():
        support = np.nonzero(np.asarray(eta.masses(n)) > 0)[0]
        A = GridSet.from_indices(n, support)
        for step in steps:
            for length in lengths:
                if (length - 1) * step > 1 << n:
                    continue
                B_idx = np.arange(length) * step
                B = GridSet.from_indices(n, B_idx)
                size = math.ceil(length ** (1 - delta) - 1e-12)
                fibers = _greedy_fibers(A, B_idx, size)
                res = entropy_increase_experiment(eta, A, B, fibers, gamma, l, delta)
                rows.append(
                    {
                        "measure": name,
                        "step": step,
                        "length": length,
                        "fiber_size": size,
                        "union_size": res.report.union_size,
                        "exponent": res.report.exponent,
                        "hypotheses_hold": res.checks.all_hold,
                        "growth": res.growth,
                    }
                )
    ok = [r for r in rows if r["hypotheses_hold"]]
    worst = min(ok, key=lambda r: (r["exponent"], r["measure"], r["step"], r["length"])) if ok else None
    return {
        "n": n,
        "gamma": gamma,
        "l": l,
        "delta": delta,
        "instances": rows,
        "min_exponent": worst["exponent"] if worst else None,
        "argmin": worst,
        "counterexample_found": any(not r["growth"] for r in ok),
    }
