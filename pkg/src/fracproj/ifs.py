"""Affine IFSs on the line: words and stopping sets, plus tree-measure builders.

Maps are ``f_i(x) = r_i x + s_i``.  For a word ``I = i_1 ... i_k`` the
composition is ``f_I = f_{i_1} o ... o f_{i_k}``, so ``r_I`` is the product
of the ratios and ``s_I = s_{i_1} + r_{i_1} s_{i_2} + r_{i_1} r_{i_2} s_{i_3} + ...``.
Coefficients may be floats or exact numbers (``Fraction``/``QuadraticNumber``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dyadic import Chart, DyadicCell, TreeMeasure, bin_points
from .errors import BudgetExceededError
from .exact import is_exact

__all__ = [
    "AffineContraction",
    "WeightedIFS",
    "Word",
    "similarity_dimension",
    "stopping_words",
    "stopping_set_size",
    "stopping_atoms",
    "build_tree_measure",
    "attractor_cells",
    "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 1 << 26
# above this many stopping words the grid iteration is faster at equal accuracy
AUTO_WORD_LIMIT = 1 << 20


@dataclass(frozen=True)
class AffineContraction:
    ratio: object
    translation: object

    def __post_init__(self):
        r = float(self.ratio)
        if r == 0 or abs(r) >= 1:
            raise ValueError(f"contraction ratio must satisfy 0 < |r| < 1, got {self.ratio}")

    def __call__(self, x):
        return self.ratio * x + self.translation

    def fixed_point(self):
        return self.translation / (1 - self.ratio)


@dataclass(frozen=True)
class WeightedIFS:
    """Contractions ``maps[i]`` chosen with probabilities ``weights[i]``."""

    maps: tuple[AffineContraction, ...]
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "weights", tuple(self.weights))
        if not self.maps:
            raise ValueError("an IFS needs at least one map")
        if len(self.weights) != len(self.maps):
            raise ValueError("one weight per map")
        if any(float(p) <= 0 for p in self.weights):
            raise ValueError("weights must be strictly positive")
        if abs(sum(float(p) for p in self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple], weights: Sequence | None = None) -> WeightedIFS:
        maps = tuple(AffineContraction(r, s) for r, s in pairs)
        if weights is None:
            m = len(maps)
            exact = all(is_exact(r) and is_exact(s) for r, s in pairs)
            weights = [Fraction(1, m) if exact else 1.0 / m] * m
        return cls(maps, tuple(weights))

    @classmethod
    def bernoulli_convolution(cls, lam, digits=(0, 1), weights=None) -> WeightedIFS:
        """Maps ``x -> lam*x + t`` for ``t`` in ``digits``."""
        return cls.from_pairs([(lam, t) for t in digits], weights)

    def __len__(self):
        return len(self.maps)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([float(f.ratio) for f in self.maps])

    @property
    def translations(self) -> np.ndarray:
        return np.array([float(f.translation) for f in self.maps])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([float(p) for p in self.weights])

    def is_exact(self) -> bool:
        return all(is_exact(f.ratio) and is_exact(f.translation) for f in self.maps)

    def hull(self) -> tuple:
        """Convex hull ``(a, b)`` of the attractor.

        Closed form when every ratio is positive (exact if the coefficients
        are); otherwise a float iteration of the hull map to convergence.
        """
        if all(float(f.ratio) > 0 for f in self.maps):
            fps = [f.fixed_point() for f in self.maps]
            return min(fps), max(fps)
        fps = [float(f.fixed_point()) for f in self.maps]
        a, b = min(fps), max(fps)
        for _ in range(100000):
            ends = [float(f(a)) for f in self.maps] + [float(f(b)) for f in self.maps]
            na, nb = min(ends), max(ends)
            if na == a and nb == b:
                break
            a, b = min(a, na), max(b, nb)
        return a, b

    def rescaled(self) -> tuple[WeightedIFS, Chart]:
        """Conjugate by an increasing affine map so the attractor hull becomes ``[0, 1]``."""
        a, b = self.hull()
        scale = b - a
        if scale == 0:
            scale = 1
        maps = [AffineContraction(f.ratio, (f.translation + f.ratio * a - a) / scale) for f in self.maps]
        return WeightedIFS(tuple(maps), self.weights), Chart((a,), scale)

    def conjugated(self, scale, offset) -> WeightedIFS:
        """The IFS ``h o f_i o h^{-1}`` with ``h(x) = scale*x + offset``."""
        maps = [
            AffineContraction(f.ratio, scale * f.translation + offset - f.ratio * offset)
            for f in self.maps
        ]
        return WeightedIFS(tuple(maps), self.weights)


@dataclass(frozen=True, order=True)
class Word:
    """A finite word over the alphabet ``{0, ..., m-1}``."""

    symbols: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))

    @classmethod
    def parse(cls, text: str) -> Word:
        if "." in text:
            return cls(tuple(int(t) for t in text.split(".") if t))
        return cls(tuple(int(c) for c in text))

    def __len__(self):
        return len(self.symbols)

    def __str__(self):
        if all(s < 10 for s in self.symbols):
            return "".join(str(s) for s in self.symbols)
        return ".".join(str(s) for s in self.symbols)

    def __add__(self, other: Word) -> Word:
        return Word(self.symbols + other.symbols)

    def truncated(self) -> Word:
        """``I^-``: drop the last symbol."""
        return Word(self.symbols[:-1])

    def ratio(self, ifs: WeightedIFS):
        r = 1
        for s in self.symbols:
            r = r * ifs.maps[s].ratio
        return r

    def weight(self, ifs: WeightedIFS):
        p = 1
        for s in self.symbols:
            p = p * ifs.weights[s]
        return p

    def map(self, ifs: WeightedIFS) -> tuple:
        """``(r_I, s_I)`` with ``f_I(x) = r_I x + s_I``."""
        r, t = 1, 0
        for s in self.symbols:
            f = ifs.maps[s]
            t = t + r * f.translation
            r = r * f.ratio
        return r, t

    def apply(self, ifs: WeightedIFS, x):
        r, t = self.map(ifs)
        return r * x + t


def similarity_dimension(ifs: WeightedIFS) -> float:
    """``sum p_i log p_i / sum p_i log |r_i|``."""
    p = ifs.probabilities
    r = np.abs(ifs.ratios)
    return float(np.dot(p, np.log(p)) / np.dot(p, np.log(r)))


def stopping_words(ifs: WeightedIFS, k: int) -> list[Word]:
    """``Lambda_k``: words with ``|r_I| <= 2**-k < |r_{I^-}|``, in lexicographic order."""
    if k < 1:
        raise ValueError("k must be at least 1")
    threshold = Fraction(1, 1 << k)
    exact = ifs.is_exact()
    bound = threshold if exact else 2.0**-k
    out: list[Word] = []
    stack = [((), 1)]
    m = len(ifs)
    while stack:
        sym, r = stack.pop()
        if abs(r) <= bound:
            out.append(Word(sym))
            continue
        for i in reversed(range(m)):
            stack.append((sym + (i,), r * ifs.maps[i].ratio))
    return out


def stopping_atoms(
    ratios,
    translations,
    weights,
    x0,
    k: int,
    budget: int = DEFAULT_BUDGET,
    track_words: bool = False,
):
    """Vectorized enumeration of ``Lambda_k`` for homothety IFSs in any dimension.

    Parameters
    ----------
    ratios : (m,) array
    translations : (m, d) array
    weights : (m,) array
    x0 : (d,) array
        Reference point; atoms are ``f_I(x0)``.
    k : int
        Stopping scale ``2**-k``.

    Returns
    -------
    points : (N, d) array
    masses : (N,) array
        ``p_I`` for each stopping word.
    words : list of tuple, optional
        Only when ``track_words`` is set.
    """
    ratios = np.asarray(ratios, dtype=float)
    trans = np.asarray(translations, dtype=float)
    if trans.ndim == 1:
        trans = trans[:, None]
    weights = np.asarray(weights, dtype=float)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    m, d = trans.shape
    threshold = math.ldexp(1.0, -k)

    R = np.ones(1)
    S = np.zeros((1, d))
    P = np.ones(1)
    codes = np.zeros(1, dtype=np.int64)
    lengths = np.zeros(1, dtype=np.int64)
    done_pts, done_p, done_codes, done_len = [], [], [], []
    n_done = 0
    while R.size:
        stop = np.abs(R) <= threshold
        if stop.any():
            done_pts.append(S[stop] + R[stop, None] * x0)
            done_p.append(P[stop])
            if track_words:
                done_codes.append(codes[stop])
                done_len.append(lengths[stop])
            n_done += int(stop.sum())
        keep = ~stop
        R, S, P = R[keep], S[keep], P[keep]
        if not R.size:
            break
        if n_done + R.size * m > budget:
            raise BudgetExceededError(budget)
        # append each symbol: S_{Ii} = S_I + R_I s_i, R_{Ii} = R_I r_i
        S = (S[:, None, :] + R[:, None, None] * trans[None, :, :]).reshape(-1, d)
        R = (R[:, None] * ratios[None, :]).ravel()
        P = (P[:, None] * weights[None, :]).ravel()
        if track_words:
            codes = codes[keep]
            lengths = lengths[keep]
            if lengths.size and (lengths.max() + 1) * math.log2(max(m, 2)) > 62:
                raise BudgetExceededError(budget, knob="depth (word codes overflow)")
            codes = (codes[:, None] * m + np.arange(m)[None, :]).ravel()
            lengths = np.repeat(lengths + 1, m)
    points = np.concatenate(done_pts) if done_pts else np.zeros((0, d))
    masses = np.concatenate(done_p) if done_p else np.zeros(0)
    if not track_words:
        return points, masses
    codes = np.concatenate(done_codes)
    lens = np.concatenate(done_len)
    words = [_decode(int(c), int(n), m) for c, n in zip(codes, lens)]
    return points, masses, words


def _decode(code: int, length: int, m: int) -> tuple[int, ...]:
    out = [0] * length
    for j in range(length - 1, -1, -1):
        code, out[j] = divmod(code, m)
    return tuple(out)


def _quantized_fixed_point(ratios, trans, weights, x0, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Iterate ``nu -> sum p_i f_i nu`` on the ``2**-resolution`` grid of ``[0,1)**d``.

    Mass is snapped to grid-cell centres after every step.  Displacement
    errors contract by ``max|r|`` per step, so the accumulated error stays
    below ``2**-resolution / (1 - max|r|)``.
    """
    ratios = np.asarray(ratios, dtype=float)
    trans = np.asarray(trans, dtype=float)
    if trans.ndim == 1:
        trans = trans[:, None]
    d = trans.shape[1]
    side = 1 << resolution
    rmax = float(np.max(np.abs(ratios)))
    steps = math.ceil(resolution / -math.log2(rmax)) + 1
    pts = np.atleast_2d(np.asarray(x0, dtype=float))
    w = np.ones(1)
    for _ in range(steps):
        new = (ratios[:, None, None] * pts[None, :, :] + trans[:, None, :]).reshape(-1, d)
        nw = (np.asarray(weights, dtype=float)[:, None] * w[None, :]).ravel()
        idx = np.floor(np.ldexp(new, resolution)).astype(np.int64)
        np.clip(idx, 0, side - 1, out=idx)
        flat = np.ravel_multi_index(tuple(idx.T), (side,) * d)
        if d == 1 and side <= 1 << 24:
            acc = np.bincount(flat, weights=nw, minlength=side)
            flat = np.flatnonzero(acc)
            w = acc[flat]
        else:
            flat, inv = np.unique(flat, return_inverse=True)
            w = np.bincount(inv.ravel(), weights=nw)
        cells = np.stack(np.unravel_index(flat, (side,) * d), axis=1)
        pts = np.ldexp(cells + 0.5, -resolution)
    return pts, w


def build_tree_measure(
    ifs: WeightedIFS,
    n: int,
    guard: int = 6,
    budget: int = DEFAULT_BUDGET,
    method: str = "words",
) -> TreeMeasure:
    """Depth-``n`` tree approximation of the self-similar measure ``mu_p``.

    The attractor is first rescaled into ``[0, 1]`` (the chart is stored on
    the result).  With ``method="words"`` each stopping word
    ``I in Lambda_{n+guard}`` puts its full weight ``p_I`` in the cell
    containing ``f_I(x0)``, ``x0`` being the fixed point of the first map;
    misplaced mass only reaches adjacent cells, so entropies are off by
    ``O(1)`` bits independently of ``n``.  ``method="grid"`` instead iterates
    the self-similarity on the ``2**-(n+guard)`` grid, which handles deep
    trees of heavily overlapping systems; ``"auto"`` picks words when the
    stopping set has at most ``min(budget, 2**20)`` words and the grid
    otherwise.

    Raises
    ------
    BudgetExceededError
        ``method="words"`` and ``Lambda_{n+guard}`` has more than ``budget`` words.
    """
    if n < 0 or guard < 0:
        raise ValueError("depth and guard must be nonnegative")
    scaled, chart = ifs.rescaled()
    ratios, trans, p = scaled.ratios, scaled.translations, scaled.probabilities
    x0 = np.array([float(scaled.maps[0].fixed_point())])
    if method == "auto":
        method = "words" if stopping_set_size(ratios, n + guard) <= min(budget, AUTO_WORD_LIMIT) else "grid"
    if method == "words":
        pts, w = stopping_atoms(ratios, trans, p, x0, n + guard, budget=budget)
    elif method == "grid":
        pts, w = _quantized_fixed_point(ratios, trans, p, x0, n + guard)
    else:
        raise ValueError(f"unknown method {method!r}")
    return bin_points(pts, w, n, chart=chart)


def stopping_set_size(ratios, k: int) -> int:
    """``|Lambda_k|`` counted by dynamic programming over accumulated log-ratios."""
    logs = [-math.log2(abs(float(r))) for r in ratios]
    memo: dict[int, int] = {}
    # quantize accumulated -log2|r_I| on a fine integer lattice to share subproblems
    q = 1 << 20
    steps = [max(1, round(v * q)) for v in logs]
    target = k * q

    def count(acc: int) -> int:
        if acc >= target:
            return 1
        if acc in memo:
            return memo[acc]
        total = 0
        for s in steps:
            total += count(acc + s)
        memo[acc] = total
        return total

    import sys

    limit = sys.getrecursionlimit()
    needed = target // min(steps) + 100
    if needed > limit:
        sys.setrecursionlimit(needed + 100)
    try:
        return count(0)
    finally:
        sys.setrecursionlimit(limit)


def attractor_cells(ratios, translations, weights, k: int, budget: int = DEFAULT_BUDGET) -> list[DyadicCell]:
    """Depth-``k`` cells hit by the atoms ``f_I(x0)``, ``I in Lambda_k``, of a rescaled IFS.

    This is the support of the guard-free atom-placement measure: one
    anchor per stopping cylinder of diameter at most ``2**-k``.
    """
    trans = np.asarray(translations, dtype=float)
    if trans.ndim == 1:
        trans = trans[:, None]
    r0 = float(np.asarray(ratios, dtype=float)[0])
    x0 = trans[0] / (1.0 - r0)
    pts, _ = stopping_atoms(ratios, trans, weights, x0, k, budget=budget)
    side = 1 << k
    idx = np.floor(np.ldexp(pts, k)).astype(np.int64)
    np.clip(idx, 0, side - 1, out=idx)
    uniq = np.unique(idx, axis=0)
    return [DyadicCell(k, tuple(int(c) for c in row)) for row in uniq]
