"""Parameter-dependent affine IFSs: coding differences and the transversality audit.

For infinite codings ``x`` the natural projection is
``f_{x,t}(0) = lim f_{x_1,t} o ... o f_{x_k,t}(0)`` and the coding
difference is ``Delta_{x,y}(t) = f_{x,t}(0) - f_{y,t}(0)``.  Codings here are
eventually periodic, ``x = u v v v ...``, which makes ``f_{x,t}(0)`` a finite
expression: ``f_u`` applied to the fixed point ``s_v / (1 - r_v)`` of ``f_v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .exact import is_exact
from .ifs import AffineContraction, WeightedIFS

__all__ = [
    "Jet",
    "Coding",
    "ParametricFamily",
    "DeltaJet",
    "delta_jet",
    "coding_distance",
    "TransversalityReport",
    "Violation",
    "transversality_audit",
]


class Jet:
    """Second-order jet ``(f, f', f'')`` with forward-mode arithmetic."""

    __slots__ = ("v", "d1", "d2")

    def __init__(self, v, d1=0, d2=0):
        self.v, self.d1, self.d2 = v, d1, d2

    @staticmethod
    def _lift(o):
        return o if isinstance(o, Jet) else Jet(o, 0, 0)

    def __add__(self, o):
        o = self._lift(o)
        return Jet(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.d1, -self.d2)

    def __sub__(self, o):
        return self + (-self._lift(o))

    def __rsub__(self, o):
        return self._lift(o) - self

    def __mul__(self, o):
        o = self._lift(o)
        return Jet(
            self.v * o.v,
            self.d1 * o.v + self.v * o.d1,
            self.d2 * o.v + 2 * self.d1 * o.d1 + self.v * o.d2,
        )

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = self._lift(o)
        q = self.v / o.v
        q1 = (self.d1 - q * o.d1) / o.v
        q2 = (self.d2 - 2 * q1 * o.d1 - q * o.d2) / o.v
        return Jet(q, q1, q2)

    def __rtruediv__(self, o):
        return self._lift(o) / self

    def __repr__(self):
        return f"Jet({self.v!r}, {self.d1!r}, {self.d2!r})"


@dataclass(frozen=True)
class Coding:
    """Eventually periodic infinite word ``prefix + period period ...``."""

    prefix: tuple[int, ...]
    period: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(int(s) for s in self.prefix))
        object.__setattr__(self, "period", tuple(int(s) for s in self.period))
        if not self.period:
            raise ValueError("period length must be positive")

    @classmethod
    def parse(cls, text: str) -> Coding:
        """Accept ``"100(0)"``: prefix ``100`` followed by ``0`` repeated."""
        text = text.strip()
        if "(" not in text or not text.endswith(")"):
            raise ValueError(f"coding must look like 'prefix(period)', got {text!r}")
        pre, per = text[:-1].split("(", 1)
        return cls(tuple(int(c) for c in pre), tuple(int(c) for c in per))

    def __str__(self):
        return "".join(map(str, self.prefix)) + "(" + "".join(map(str, self.period)) + ")"

    def symbol(self, k: int) -> int:
        """The ``k``-th symbol, 0-based."""
        if k < len(self.prefix):
            return self.prefix[k]
        return self.period[(k - len(self.prefix)) % len(self.period)]

    def expand(self, length: int) -> tuple[int, ...]:
        return tuple(self.symbol(k) for k in range(length))


def coding_distance(x: Coding, y: Coding) -> tuple[int | None, float]:
    """``(|x ^ y|, d(x, y))`` with ``d = 2**-|x ^ y|``; ``(None, 0.0)`` if ``x == y``."""
    horizon = max(len(x.prefix), len(y.prefix)) + math.lcm(len(x.period), len(y.period))
    for k in range(horizon):
        if x.symbol(k) != y.symbol(k):
            return k, 2.0**-k
    return None, 0.0


def _horner(coeffs, t):
    out = 0
    for c in reversed(coeffs):
        out = out * t + c
    return out


class ParametricFamily:
    """``t -> {f_{i,t}(x) = r_i(t) x + s_i(t)}`` with fixed weights.

    Parameters
    ----------
    ratio_funcs, translation_funcs : sequences of callables or coefficient lists
        Coefficient lists (lowest degree first) define polynomial families;
        these get closed-form jets and stay exact at exact ``t``.
    weights : sequence
    interval : (float, float)
        Parameter interval ``J`` on which the family is meant to be used.
    derivatives : optional sequence of callables ``t -> (dr, ddr, ds, dds)``
        Closed-form first and second derivatives for callable families.
    step : float
        Central-difference step when no closed form is available.
    """

    def __init__(
        self,
        ratio_funcs: Sequence,
        translation_funcs: Sequence,
        weights: Sequence | None = None,
        interval: tuple[float, float] = (0.0, 1.0),
        derivatives: Sequence[Callable] | None = None,
        step: float = 1e-6,
    ):
        if len(ratio_funcs) != len(translation_funcs):
            raise ValueError("one ratio and one translation per map")
        self.size = len(ratio_funcs)
        self.polynomial = all(not callable(f) for f in list(ratio_funcs) + list(translation_funcs))
        if self.polynomial:
            self.ratio_polys = [tuple(c) for c in ratio_funcs]
            self.translation_polys = [tuple(c) for c in translation_funcs]
        else:
            self.ratio_funcs = [f if callable(f) else (lambda t, c=tuple(f): _horner(c, t)) for f in ratio_funcs]
            self.translation_funcs = [
                f if callable(f) else (lambda t, c=tuple(f): _horner(c, t)) for f in translation_funcs
            ]
        if weights is None:
            weights = [Fraction(1, self.size)] * self.size
        self.weights = tuple(weights)
        self.interval = (float(interval[0]), float(interval[1]))
        self.derivatives = derivatives
        self.step = step
        self.truncation_error = 0.0

    @classmethod
    def bernoulli_convolution(cls, digits=(0, 1), weights=None, interval=(0.0, 1.0)) -> ParametricFamily:
        """``f_{i,lam}(x) = lam x + digits[i]``."""
        return cls([(0, 1)] * len(digits), [(d,) for d in digits], weights, interval)

    def at(self, t) -> WeightedIFS:
        if self.polynomial:
            pairs = [(_horner(rc, t), _horner(sc, t)) for rc, sc in zip(self.ratio_polys, self.translation_polys)]
        else:
            pairs = [(rf(t), sf(t)) for rf, sf in zip(self.ratio_funcs, self.translation_funcs)]
        weights = self.weights
        if not all(is_exact(r) and is_exact(s) for r, s in pairs):
            weights = tuple(float(p) for p in weights)
        return WeightedIFS(tuple(AffineContraction(r, s) for r, s in pairs), weights)

    def __call__(self, t) -> WeightedIFS:
        return self.at(t)

    def jets(self, t) -> list[tuple[Jet, Jet]]:
        """Per map ``(Jet(r_i), Jet(s_i))`` at ``t``."""
        if self.polynomial:
            tj = Jet(t, 1, 0)
            return [(_horner(rc, tj) + Jet(0), _horner(sc, tj) + Jet(0)) for rc, sc in zip(self.ratio_polys, self.translation_polys)]
        if self.derivatives is not None:
            out = []
            for i in range(self.size):
                dr, ddr, ds, dds = self.derivatives[i](t)
                out.append((Jet(self.ratio_funcs[i](t), dr, ddr), Jet(self.translation_funcs[i](t), ds, dds)))
            return out
        return [(self._fd_jet(self.ratio_funcs[i], t), self._fd_jet(self.translation_funcs[i], t)) for i in range(self.size)]

    def _fd_jet(self, f: Callable, t) -> Jet:
        """Central differences with one Richardson step; error estimate kept on the family."""
        t = float(t)
        h = self.step
        f0 = float(f(t))

        def d1(hh):
            return (float(f(t + hh)) - float(f(t - hh))) / (2 * hh)

        def d2(hh):
            return (float(f(t + hh)) - 2 * f0 + float(f(t - hh))) / (hh * hh)

        a1, b1 = d1(h), d1(h / 2)
        a2, b2 = d2(h), d2(h / 2)
        self.truncation_error = max(self.truncation_error, abs(b1 - a1) / 3, abs(b2 - a2) / 3)
        return Jet(f0, (4 * b1 - a1) / 3, (4 * b2 - a2) / 3)

    def derivative_bound(self, samples: int = 257) -> float:
        """Largest ``|r_i|, |r_i'|, |r_i''|, |s_i'|, |s_i''|`` seen on a grid over the interval."""
        best = 0.0
        for t in np.linspace(*self.interval, samples):
            for r, s in self.jets(float(t)):
                best = max(best, abs(float(r.d1)), abs(float(r.d2)), abs(float(s.d1)), abs(float(s.d2)))
        return best


def _word_jet(jets, word) -> tuple[Jet, Jet]:
    """``(r_w, s_w)`` for the composition ``f_{w_1} o ... o f_{w_k}``."""
    r, s = Jet(1), Jet(0)
    for i in word:
        ri, si = jets[i]
        s = s + r * si
        r = r * ri
    return r, s


def _projection_jet(jets, x: Coding) -> Jet:
    rv, sv = _word_jet(jets, x.period)
    fixed = sv / (1 - rv)
    ru, su = _word_jet(jets, x.prefix)
    return su + ru * fixed


@dataclass(frozen=True)
class DeltaJet:
    value: object
    first: object
    second: object
    truncation_error: float = 0.0

    def __iter__(self):
        return iter((self.value, self.first, self.second))


def delta_jet(family: ParametricFamily, x: Coding | str, y: Coding | str, t) -> DeltaJet:
    """``(Delta, Delta', Delta'')`` of the coding difference at ``t``.

    Exact when the family is polynomial and ``t`` is exact.
    """
    x = Coding.parse(x) if isinstance(x, str) else x
    y = Coding.parse(y) if isinstance(y, str) else y
    if x == y:
        return DeltaJet(0, 0, 0)
    family.truncation_error = 0.0
    jets = family.jets(t)
    d = _projection_jet(jets, x) - _projection_jet(jets, y)
    return DeltaJet(d.v, d.d1, d.d2, family.truncation_error)


@dataclass(frozen=True)
class Violation:
    x: str
    y: str
    t: float
    delta: float
    delta_prime: float


@dataclass
class TransversalityReport:
    """Outcome of a finite transversality audit.

    An empty violation list means no violation was found at this
    resolution; it does not prove the condition.
    """

    pairs_audited: int
    grid_points: int
    beta: float
    c_beta: float
    depth: int
    interval: tuple[float, float]
    sampled: bool
    violations: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def _vector_jets(family: ParametricFamily, grid: np.ndarray):
    """Per map value/derivative arrays over the grid: ``(r, dr, s, ds)``, each (m, G)."""
    m = family.size
    out = np.zeros((4, m, grid.size))
    for g, t in enumerate(grid):
        for i, (r, s) in enumerate(family.jets(float(t))):
            out[:, i, g] = float(r.v), float(r.d1), float(s.v), float(s.d1)
    return out


def _enumerate_codings(family: ParametricFamily, grid: np.ndarray, n: int):
    """Codings ``I i^inf`` with ``|I| = n``: symbol arrays and projection jets over the grid."""
    r, dr, s, ds = _vector_jets(family, grid)
    m = family.size
    fix = s / (1 - r)
    dfix = (ds * (1 - r) + s * dr) / (1 - r) ** 2
    # words of length n, lexicographic
    R = np.ones((1, grid.size))
    dR = np.zeros((1, grid.size))
    S = np.zeros((1, grid.size))
    dS = np.zeros((1, grid.size))
    for _ in range(n):
        S = (S[:, None] + R[:, None] * s[None]).reshape(-1, grid.size)
        dS = (dS[:, None] + dR[:, None] * s[None] + R[:, None] * ds[None]).reshape(-1, grid.size)
        dR = (dR[:, None] * r[None] + R[:, None] * dr[None]).reshape(-1, grid.size)
        R = (R[:, None] * r[None]).reshape(-1, grid.size)
    val = (S[:, None] + R[:, None] * fix[None]).reshape(-1, grid.size)
    der = (dS[:, None] + dR[:, None] * fix[None] + R[:, None] * dfix[None]).reshape(-1, grid.size)
    words = np.array(np.unravel_index(np.arange(m**n), (m,) * n)).T if n else np.zeros((1, 0), dtype=np.int64)
    symbols = np.repeat(words, m, axis=0)
    tails = np.tile(np.arange(m), m**n)
    seq = np.concatenate([symbols, tails[:, None]], axis=1)
    return seq, val, der


def _shared_length(seq: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = seq[a] != seq[b]
    return np.argmax(diff, axis=1)


def transversality_audit(
    family: ParametricFamily,
    interval: tuple[float, float],
    beta: float,
    c_beta: float,
    depth: int,
    t_grid: int | Sequence[float] = 101,
    max_pairs: int = 1 << 18,
    seed: int = 0,
    chunk: int = 1 << 14,
) -> TransversalityReport:
    """Check ``|Delta| <= C d^beta  =>  |Delta'| >= C d^beta`` on a finite sample.

    Codings are ``I i^inf`` for words ``I`` of length ``depth`` and tail
    symbols ``i``.  All unordered pairs of distinct codings are audited when
    there are at most ``max_pairs`` of them; otherwise pairs are sampled in
    strata by shared-prefix length with a seeded generator, ``max_pairs``
    split evenly across strata.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if isinstance(t_grid, (int, np.integer)):
        if t_grid < 1:
            raise ValueError("grid needs at least one point")
        grid = np.linspace(lo, hi, int(t_grid))
    else:
        grid = np.asarray(t_grid, dtype=float)
        if grid.size >= 2 and np.max(np.diff(np.sort(grid))) > hi - lo:
            raise ValueError("grid step larger than the interval")
    if grid.size == 1 and hi < lo:
        raise ValueError("empty interval")
    seq, val, der = _enumerate_codings(family, grid, depth)
    N = seq.shape[0]
    total = N * (N - 1) // 2
    sampled = total > max_pairs
    if not sampled:
        ia, ib = np.triu_indices(N, k=1)
    else:
        rng = np.random.default_rng(seed)
        per = max(1, max_pairs // (depth + 1))
        parts_a, parts_b = [], []
        for k in range(depth + 1):
            a = rng.integers(0, N, size=per * 4)
            b = rng.integers(0, N, size=per * 4)
            keep = a != b
            a, b = a[keep], b[keep]
            shared = _shared_length(seq, a, b)
            sel = shared == k
            parts_a.append(a[sel][:per])
            parts_b.append(b[sel][:per])
        ia, ib = np.concatenate(parts_a), np.concatenate(parts_b)
    report = TransversalityReport(int(ia.size), int(grid.size), beta, c_beta, depth, (lo, hi), sampled)
    for start in range(0, ia.size, chunk):
        a, b = ia[start : start + chunk], ib[start : start + chunk]
        shared = _shared_length(seq, a, b)
        bound = c_beta * np.exp2(-beta * shared.astype(float))[:, None]
        d0 = np.abs(val[a] - val[b])
        d1 = np.abs(der[a] - der[b])
        bad = (d0 <= bound) & (d1 < bound)
        for pi, gi in zip(*np.nonzero(bad)):
            x = Coding(tuple(seq[a[pi], :-1]), (int(seq[a[pi], -1]),))
            y = Coding(tuple(seq[b[pi], :-1]), (int(seq[b[pi], -1]),))
            report.violations.append(Violation(str(x), str(y), float(grid[gi]), float(d0[pi, gi]), float(d1[pi, gi])))
    return report
