"""Magnification dynamics on tree measures and the statistics built from scenery orbits.

One magnification step zooms into the depth-1 cell ``D`` containing the
point and rescales everything by the cell homothety ``S_D``::

    M(mu, x) = (mu^D, S_D(x)),   D = D_1(x).

A finite tree loses one level per step.  Measures registered with a
:class:`SelfSimilarSource` are re-extended from their generating IFS so that
orbits can run for arbitrarily many steps at constant resolution.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dyadic import (
    DyadicCell,
    TreeMeasure,
    bin_points,
    cell_of_point,
    component_entropies,
    component_measure,
    entropy_bits,
    translated_masses,
)
from .errors import EmptyComponentError, ResolutionError

__all__ = [
    "SelfSimilarSource",
    "SceneryState",
    "magnify",
    "CesaroStats",
    "scenery_orbit",
    "uniform_entropy_statistic",
    "SpreadingReport",
    "spreading_check",
    "default_translations",
]


@dataclass
class _Frontier:
    """Pieces ``y -> R y + S`` of the measure in the local chart of the current cell, with weights."""

    R: np.ndarray
    S: np.ndarray
    P: np.ndarray


class SelfSimilarSource:
    """Regenerates components of a self-similar measure from its IFS.

    The IFS must already live in ``[0, 1]**dim`` (use the ``rescaled`` system).
    The current cell is tracked through the cylinders ``f_I`` that meet it,
    stored in the cell's own coordinates, so precision does not degrade with
    depth.  Components are atom placements at ``2**-(depth + guard)``; for
    homogeneous dyadic systems without overlaps they are exact.
    """

    def __init__(self, ratios, translations, weights, guard: int = 6, max_pieces: int = 1 << 22):
        self.r = np.asarray(ratios, dtype=float)
        t = np.asarray(translations, dtype=float)
        self.t = t[:, None] if t.ndim == 1 else t
        self.p = np.asarray(weights, dtype=float)
        self.dim = self.t.shape[1]
        self.guard = guard
        self.max_pieces = max_pieces
        self.x0 = self.t[0] / (1.0 - self.r[0])

    @classmethod
    def from_ifs(cls, ifs, guard: int = 6) -> SelfSimilarSource:
        """From a :class:`~fracproj.ifs.WeightedIFS` or :class:`~fracproj.planar.PlanarIFS` (rescaled first)."""
        scaled, _ = ifs.rescaled()
        if hasattr(scaled, "maps"):
            return cls(scaled.ratios, scaled.translations, scaled.probabilities, guard)
        r = [float(v) for v in scaled.ratios]
        t = [[float(a), float(b)] for a, b in scaled.translations]
        return cls(r, t, [float(v) for v in scaled.weights], guard)

    @classmethod
    def bernoulli(cls, p: Sequence[float], guard: int = 0) -> SelfSimilarSource:
        """Base-2 Bernoulli measure: maps ``x/2`` and ``x/2 + 1/2`` with weights ``p``."""
        return cls([0.5, 0.5], [0.0, 0.5], p, guard)

    def initial(self) -> _Frontier:
        return _Frontier(np.ones(1), np.zeros((1, self.dim)), np.ones(1))

    def _meets_cube(self, R, S):
        lo = np.minimum(S, S + R[:, None])
        hi = np.maximum(S, S + R[:, None])
        return np.all((hi > 0) & (lo < 1), axis=1)

    def _expand(self, fr: _Frontier, size: float) -> _Frontier:
        """Replace pieces with ``|R| > size`` by their children, dropping pieces off the cube."""
        R, S, P = fr.R, fr.S, fr.P
        done_R, done_S, done_P = [], [], []
        while R.size:
            small = np.abs(R) <= size
            done_R.append(R[small])
            done_S.append(S[small])
            done_P.append(P[small])
            R, S, P = R[~small], S[~small], P[~small]
            if not R.size:
                break
            m = self.r.size
            S = (S[:, None, :] + R[:, None, None] * self.t[None]).reshape(-1, self.dim)
            R = (R[:, None] * self.r[None]).ravel()
            P = (P[:, None] * self.p[None]).ravel()
            keep = self._meets_cube(R, S)
            R, S, P = R[keep], S[keep], P[keep]
            if sum(x.size for x in done_R) + R.size > self.max_pieces:
                raise RuntimeError(f"budget exceeded: more than {self.max_pieces} pieces (reduce depth or guard)")
        return _Frontier(np.concatenate(done_R), np.concatenate(done_S), np.concatenate(done_P))

    def zoom(self, fr: _Frontier, coords: Sequence[int]) -> _Frontier:
        """Frontier of the child cell ``coords`` (each 0 or 1) in its own chart."""
        fr = self._expand(fr, 0.5)
        c = np.asarray(coords, dtype=float)
        R = 2.0 * fr.R
        S = 2.0 * fr.S - c[None, :]
        keep = self._meets_cube(R, S)
        P = fr.P[keep]
        total = P.sum()
        if total <= 0:
            raise EmptyComponentError("empty component")
        return _Frontier(R[keep], S[keep], P / total)

    def component(self, fr: _Frontier, depth: int) -> TreeMeasure:
        """Depth-``depth`` tree of the normalized measure on the current cell."""
        fine = self._expand(fr, math.ldexp(1.0, -(depth + self.guard)))
        pts = fine.S + fine.R[:, None] * self.x0[None, :]
        inside = np.all((pts >= 0) & (pts < 1), axis=1)
        w = fine.P[inside]
        if w.sum() <= 0:
            raise EmptyComponentError("empty component")
        return bin_points(pts[inside], w / w.sum(), depth)


@dataclass
class SceneryState:
    """A measure on ``[0,1)**dim`` with a point, evolved by :func:`magnify`.

    ``remaining_depth`` is the tree depth still available; it stays constant
    for measures with a ``source``.
    """

    measure: TreeMeasure
    point: tuple
    source: SelfSimilarSource | None = None
    frontier: _Frontier | None = field(default=None, repr=False)

    def __post_init__(self):
        if not isinstance(self.point, tuple):
            p = self.point
            self.point = tuple(p) if isinstance(p, (list, np.ndarray)) else (p,)
        if self.source is not None and self.frontier is None:
            self.frontier = self.source.initial()

    @classmethod
    def from_source(cls, source: SelfSimilarSource, point, depth: int) -> SceneryState:
        fr = source.initial()
        return cls(source.component(fr, depth), point, source, fr)

    @property
    def remaining_depth(self) -> int:
        return self.measure.max_depth

    @property
    def cell(self) -> DyadicCell:
        return cell_of_point(self.point, 1)


def magnify(state: SceneryState, child: Sequence[int] | None = None) -> SceneryState:
    """One step of ``M``.

    ``child`` overrides the depth-1 cell (used when the point is drawn digit
    by digit); by default it is ``D_1(point)``.
    """
    coords = tuple(child) if child is not None else state.cell.coords
    cell = DyadicCell(1, coords)
    if state.measure.max_depth >= 1 and state.measure.mass(cell) <= 0:
        raise EmptyComponentError("empty component: zero-mass cell")
    point = tuple(2 * x - c for x, c in zip(state.point, coords))
    if state.source is not None:
        fr = state.source.zoom(state.frontier, coords)
        mu = state.source.component(fr, state.measure.max_depth)
        return SceneryState(mu, point, state.source, fr)
    if state.measure.max_depth < 1:
        raise ResolutionError(1, 0)
    return SceneryState(component_measure(state.measure, cell), point)


@dataclass
class CesaroStats:
    """Per-step ``(1/l) H(mu^{D_k(x)}, D_l)`` along an orbit, with running means."""

    l: int
    values: np.ndarray
    cells: list = field(repr=False)
    seed: int | None = None

    @property
    def steps(self) -> int:
        return int(self.values.size)

    @property
    def running_mean(self) -> np.ndarray:
        return np.cumsum(self.values) / np.arange(1, self.values.size + 1)

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    def merge(self, other: CesaroStats) -> CesaroStats:
        """Pool two orbits' values (order of pooling does not change the mean)."""
        if other.l != self.l:
            raise ValueError("cannot merge statistics at different l")
        return CesaroStats(self.l, np.concatenate([self.values, other.values]), self.cells + other.cells, None)

    def to_csv(self, header: str = "") -> str:
        buf = io.StringIO()
        if header:
            buf.write(header)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "cell_coords", "component_entropy_over_l", "running_mean"])
        for k, (c, v, m) in enumerate(zip(self.cells, self.values, self.running_mean), start=1):
            w.writerow([k, ";".join(str(x) for x in c), repr(float(v)), repr(float(m))])
        return buf.getvalue()


def scenery_orbit(
    mu: TreeMeasure | SelfSimilarSource,
    x=None,
    steps: int = 100,
    l: int = 8,
    seed: int = 0,
) -> CesaroStats:
    """Record ``(1/l) H(mu^{D_k(x)}, D_l)`` for ``k = 1..steps``.

    With ``x=None`` the point is drawn from ``mu`` digit by digit: at each
    step the next child cell is chosen with probability proportional to its
    mass in the current component, which samples ``x ~ mu`` exactly.
    ``cells`` records the absolute coordinates of ``D_k(x)``.
    """
    rng = np.random.default_rng(seed)
    if isinstance(mu, SelfSimilarSource):
        state = SceneryState.from_source(mu, x if x is not None else (0.0,) * mu.dim, l)
        dim = mu.dim
    else:
        if mu.max_depth < steps + l:
            raise ResolutionError(steps + l, mu.max_depth)
        state = SceneryState(mu, x if x is not None else (0.0,) * mu.dim)
        dim = mu.dim
    children = [tuple(int(b) for b in np.unravel_index(j, (2,) * dim)) for j in range(2**dim)]
    absolute = [0] * dim
    values, cells = [], []
    for _ in range(steps):
        if x is None:
            m1 = np.asarray(state.measure.masses(1)).ravel()
            j = int(rng.choice(m1.size, p=m1 / m1.sum()))
            child = children[j]
        else:
            child = state.cell.coords
        state = magnify(state, child)
        absolute = [2 * a + c for a, c in zip(absolute, child)]
        cells.append(tuple(absolute))
        values.append(entropy_bits(state.measure.masses(l)) / l)
    return CesaroStats(l, np.array(values), cells, seed if x is None else None)


def uniform_entropy_statistic(
    mu: TreeMeasure,
    n: int,
    l: int,
    eps: float,
    alpha: float,
    samples: int | None = None,
    seed: int = 0,
) -> float:
    """``mu(x : #{1 <= k <= n : |H(mu^{D_k(x)}, D_l) - l alpha| <= l eps} >= n(1 - eps))``.

    Exhaustive over depth-``n`` cells (the event only depends on ``D_n(x)``).
    With ``samples`` set, estimates the probability from that many
    ``x ~ mu`` drawn by a seeded inverse-CDF instead.
    """
    if n + l > mu.max_depth:
        raise ResolutionError(n + l, mu.max_depth)
    dim = mu.dim
    good_count = np.zeros((1 << n,) * dim, dtype=np.int64)
    for k in range(1, n + 1):
        masses, ent = component_entropies(mu, k, l)
        good = ((masses > 0) & (np.abs(ent - l * alpha) <= l * eps)).astype(np.int64)
        reps = 1 << (n - k)
        for axis in range(dim):
            good = np.repeat(good, reps, axis=axis)
        good_count += good
    hit = good_count >= n * (1 - eps)
    weights = np.asarray(mu.masses(n))
    if samples is None:
        return float(weights[hit].sum() / weights.sum())
    rng = np.random.default_rng(seed)
    flat = weights.ravel() / weights.sum()
    cdf = np.cumsum(flat)
    idx = np.searchsorted(cdf, rng.random(samples) * cdf[-1], side="right")
    idx = np.minimum(idx, flat.size - 1)
    return float(hit.ravel()[idx].mean())


# ----------------------------------------------------------------------
# dyadic spreading

_PHI = (1 + 5**0.5) / 2


def default_translations() -> list[float]:
    """``0`` and the fractional parts of ``k * golden ratio``, ``k = 1..16``."""
    return [0.0] + [math.fmod(k * _PHI, 1.0) for k in range(1, 17)]


@dataclass
class SpreadingReport:
    n: int
    l: int
    eps: float
    translation: float
    bad_fractions: np.ndarray
    weights: np.ndarray
    good_mass: dict
    spreading: bool

    @property
    def candidates(self) -> list[float]:
        return list(self.good_mass)


def _bad_fractions(eta: TreeMeasure, t: float, n: int, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Bad-scale fraction and mass for each positive depth-``(n+l)`` cell of ``eta + t``."""
    top = n + l
    origin_f, fine = translated_masses(eta, t, top)
    idx = np.flatnonzero(fine > 0)
    absolute = origin_f[0] + idx
    levels = {}
    for k in range(1, top + 1):
        o, arr = translated_masses(eta, t, k)
        levels[k] = arr[(absolute >> (top - k)) - o[0]]
    bad = np.zeros(idx.size, dtype=np.int64)
    for k in range(1, n + 1):
        bad += levels[k] <= 2 * levels[k + l]
    return bad / n, fine[idx]


def spreading_check(
    eta: TreeMeasure,
    n: int,
    l: int,
    eps: float,
    translations: Sequence[float] | None = None,
) -> SpreadingReport:
    """Search a finite list of translations for ``(n, l, eps)``-dyadic spreading.

    A scale ``k`` is bad at ``x`` when ``eta(D_k(x)) <= 2 eta(D_{k+l}(x))``.
    ``eta + t`` passes when the mass of points with bad fraction ``< eps``
    exceeds ``1 - eps``.  Translates are read as piecewise-uniform densities
    on the finest cells.  The report carries the first passing translation,
    or the best one when none passes.
    """
    if eta.dim != 1:
        raise ValueError("spreading is defined for measures on the line")
    if n + l > eta.max_depth:
        raise ResolutionError(n + l, eta.max_depth)
    cands = default_translations() if translations is None else list(translations)
    total = eta.total_mass
    best = None
    good_mass = {}
    for t in cands:
        frac, w = _bad_fractions(eta, float(t), n, l)
        gm = float(w[frac < eps].sum() / total)
        good_mass[float(t)] = gm
        passed = gm > 1 - eps
        if best is None or (passed and not best[3]) or (passed == best[3] and gm > best[2]):
            best = (float(t), (frac, w), gm, passed)
        if passed:
            break
    t, (frac, w), _, passed = best
    return SpreadingReport(n, l, eps, t, frac, w / total, good_mass, passed)
