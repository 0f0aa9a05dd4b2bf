"""Dyadic cells and finite-depth tree measures with their entropies.

A :class:`TreeMeasure` stores the masses of the dyadic cells of side
``2**-n`` that tile ``[0, 1)**dim``; coarser levels are obtained by summing
children pairwise, so parent/child consistency holds by construction.
All entropies are in bits.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import EmptyComponentError, ResolutionError

__all__ = [
    "DyadicCell",
    "Chart",
    "TreeMeasure",
    "EntropyReport",
    "cell_of_point",
    "component_measure",
    "shannon_entropy",
    "entropy_bits",
    "refine_entropy_decomposition",
    "multiscale_entropy",
    "covering_number",
    "support_cells",
    "mixture",
    "translated_masses",
    "translated_entropy",
    "bin_points",
    "tree_to_json",
    "tree_from_json",
    "tree_to_bytes",
    "tree_from_bytes",
]


@dataclass(frozen=True, order=True)
class DyadicCell:
    """The half-open box ``prod_i [l_i/2**k, (l_i+1)/2**k)``."""

    depth: int
    coords: tuple[int, ...]

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if not isinstance(self.coords, tuple):
            object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))
        if len(self.coords) not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def side(self) -> Fraction:
        return Fraction(1, 1 << self.depth)

    def bounds(self) -> list[tuple[Fraction, Fraction]]:
        s = self.side
        return [(c * s, (c + 1) * s) for c in self.coords]

    def parent(self) -> DyadicCell:
        if self.depth == 0:
            raise ValueError("a depth-0 cell has no parent")
        return DyadicCell(self.depth - 1, tuple(c >> 1 for c in self.coords))

    def ancestor(self, depth: int) -> DyadicCell:
        if not 0 <= depth <= self.depth:
            raise ValueError("ancestor depth out of range")
        shift = self.depth - depth
        return DyadicCell(depth, tuple(c >> shift for c in self.coords))

    def children(self) -> list[DyadicCell]:
        out = []
        for bits in range(1 << self.dim):
            coords = tuple(
                2 * c + ((bits >> (self.dim - 1 - i)) & 1) for i, c in enumerate(self.coords)
            )
            out.append(DyadicCell(self.depth + 1, coords))
        return out

    def contains(self, x) -> bool:
        return cell_of_point(x, self.depth) == self

    def in_unit_cube(self) -> bool:
        return all(0 <= c < (1 << self.depth) for c in self.coords)


def _scaled_floor(v, k: int) -> int:
    if isinstance(v, float):
        return math.floor(math.ldexp(v, k))
    return math.floor(v * (1 << k))


def cell_of_point(x, k: int) -> DyadicCell:
    """The depth-``k`` dyadic cell containing ``x`` (boundaries go right)."""
    if k < 0:
        raise ValueError("depth must be nonnegative")
    if isinstance(x, (Sequence, np.ndarray)) and not isinstance(x, str):
        coords = tuple(_scaled_floor(v, k) for v in x)
    else:
        coords = (_scaled_floor(x, k),)
    return DyadicCell(k, coords)


class Chart(NamedTuple):
    """Affine chart ``y = (x - offset) / scale`` from native coordinates into the tree's cube."""

    offset: tuple
    scale: float

    def to_tree(self, x):
        return tuple((float(xi) - float(o)) / float(self.scale) for xi, o in zip(x, self.offset))

    def to_native(self, y):
        return tuple(float(o) + float(self.scale) * yi for yi, o in zip(y, self.offset))


def entropy_bits(p) -> float:
    """Shannon entropy (bits) of a mass vector, with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    if p.size == 0:
        return 0.0
    return float(-np.sum(p * np.log2(p)))


def _coarsen(arr: np.ndarray) -> np.ndarray:
    d = arr.ndim
    half = arr.shape[0] // 2
    shape = []
    for _ in range(d):
        shape += [half, 2]
    return arr.reshape(shape).sum(axis=tuple(range(1, 2 * d, 2)))


def _blocks(arr: np.ndarray, coarse: int, fine: int) -> np.ndarray:
    """Regroup a depth-``fine`` array into rows, one row per depth-``coarse`` cell."""
    d = arr.ndim
    r = fine - coarse
    shape = []
    for _ in range(d):
        shape += [1 << coarse, 1 << r]
    order = list(range(0, 2 * d, 2)) + list(range(1, 2 * d, 2))
    return arr.reshape(shape).transpose(order).reshape(1 << (coarse * d), 1 << (r * d))


class TreeMeasure:
    """Masses of dyadic cells of ``[0,1)**dim`` at all depths ``0..max_depth``.

    Parameters
    ----------
    masses : array_like
        Finest-level masses, shape ``(2**n,) * dim``.
    chart : Chart, optional
        Affine chart from the native coordinates of the object the tree
        approximates (e.g. an attractor) into the unit cube.
    """

    __slots__ = ("_levels", "chart", "_dim", "_depth")

    def __init__(self, masses, chart: Chart | None = None):
        arr = np.array(masses, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        side = arr.shape[0]
        if any(s != side for s in arr.shape) or side & (side - 1):
            raise ValueError(f"masses must be a cube with power-of-two side, got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("masses must be finite and nonnegative")
        arr.setflags(write=False)
        self._dim = arr.ndim
        self._depth = side.bit_length() - 1
        self._levels = {self._depth: arr}
        self.chart = chart

    # constructors -----------------------------------------------------
    @classmethod
    def uniform(cls, depth: int, dim: int = 1) -> TreeMeasure:
        n = 1 << depth
        return cls(np.full((n,) * dim, 1.0 / n**dim))

    @classmethod
    def dirac(cls, point, depth: int) -> TreeMeasure:
        cell = cell_of_point(point, depth)
        arr = np.zeros((1 << depth,) * cell.dim)
        arr[cell.coords] = 1.0
        return cls(arr)

    @classmethod
    def bernoulli(cls, p: Sequence[float], depth: int) -> TreeMeasure:
        """Base-2 Bernoulli measure: a cell's mass is the product of the weights of its binary digits."""
        p = np.asarray(p, dtype=float)
        if p.shape != (2,) or abs(p.sum() - 1) > 1e-12:
            raise ValueError("need a probability vector of length 2")
        arr = np.ones(1)
        for _ in range(depth):
            arr = np.outer(arr, p).ravel()
        return cls(arr)

    @classmethod
    def from_cell_masses(cls, cells: dict, depth: int | None = None) -> TreeMeasure:
        """Build from ``{DyadicCell: mass}`` at a common depth."""
        items = list(cells.items())
        if not items:
            raise ValueError("no cells given")
        k = items[0][0].depth if depth is None else depth
        dim = items[0][0].dim
        arr = np.zeros((1 << k,) * dim)
        for cell, m in items:
            if cell.depth != k or cell.dim != dim:
                raise ValueError("cells must share depth and dimension")
            arr[cell.coords] += m
        return cls(arr)

    @classmethod
    def product(cls, *factors: TreeMeasure) -> TreeMeasure:
        depth = factors[0].max_depth
        if any(f.dim != 1 or f.max_depth != depth for f in factors):
            raise ValueError("product needs 1-D factors of equal depth")
        arr = factors[0].masses(depth)
        for f in factors[1:]:
            arr = np.multiply.outer(arr, f.masses(depth))
        return cls(arr)

    # access -----------------------------------------------------------
    @property
    def dim(self) -> int:
        return self._dim

    @property
    def max_depth(self) -> int:
        return self._depth

    @property
    def total_mass(self) -> float:
        return float(self.masses(0).ravel()[0])

    def masses(self, k: int) -> np.ndarray:
        """Read-only array of depth-``k`` masses."""
        if k > self._depth:
            raise ResolutionError(k, self._depth)
        if k < 0:
            raise ValueError("depth must be nonnegative")
        if k not in self._levels:
            j = min(d for d in self._levels if d > k)
            arr = self._levels[j]
            while j > k:
                arr = _coarsen(arr)
                j -= 1
                arr.setflags(write=False)
                self._levels[j] = arr
        return self._levels[k]

    def mass(self, cell: DyadicCell) -> float:
        if cell.dim != self._dim:
            raise ValueError("cell dimension mismatch")
        if not cell.in_unit_cube():
            return 0.0
        if cell.depth > self._depth:
            raise ResolutionError(cell.depth, self._depth)
        return float(self.masses(cell.depth)[cell.coords])

    def normalized(self) -> TreeMeasure:
        t = self.total_mass
        if t <= 0:
            raise EmptyComponentError("empty component")
        return TreeMeasure(self.masses(self._depth) / t, chart=self.chart)

    def coarsened(self, depth: int) -> TreeMeasure:
        return TreeMeasure(self.masses(depth), chart=self.chart)

    def check_consistency(self, rtol: float = 1e-12) -> bool:
        """Child-sum consistency at every level (always true by construction)."""
        for k in range(self._depth):
            parent = self.masses(k)
            child_sum = _coarsen(self.masses(k + 1))
            if not np.allclose(child_sum, parent, rtol=rtol, atol=0.0):
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, TreeMeasure):
            return NotImplemented
        return (
            self._dim == other._dim
            and self._depth == other._depth
            and np.array_equal(self.masses(self._depth), other.masses(other._depth))
        )

    __hash__ = None

    def __repr__(self):
        return f"TreeMeasure(dim={self._dim}, max_depth={self._depth}, total={self.total_mass:.6g})"


@dataclass(frozen=True)
class EntropyReport:
    depth: int
    entropy_bits: float

    @property
    def normalized(self) -> float:
        return self.entropy_bits / self.depth if self.depth else 0.0


def shannon_entropy(mu: TreeMeasure, k: int) -> EntropyReport:
    """``H(mu, D_k)`` in bits."""
    return EntropyReport(k, entropy_bits(mu.masses(k)))


def refine_entropy_decomposition(mu: TreeMeasure, k1: int, k2: int) -> tuple[float, float]:
    """Split ``H(mu, D_k2)`` into the coarse entropy at ``k1`` and the conditional part.

    Returns
    -------
    coarse, conditional : float
        ``H(mu, D_k1)`` and
        ``sum_a1 mu(a1) sum_{a2 in a1} mu(a2)/mu(a1) log(mu(a1)/mu(a2))``.
    """
    if not 0 <= k1 < k2:
        raise ValueError("need 0 <= k1 < k2")
    fine = mu.masses(k2)
    coarse = shannon_entropy(mu, k1).entropy_bits
    rows = _blocks(np.asarray(fine), k1, k2)
    parent = rows.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(rows > 0, rows * np.log2(parent / rows), 0.0)
    return coarse, float(terms.sum())


def component_entropies(mu: TreeMeasure, k: int, scales: int) -> tuple[np.ndarray, np.ndarray]:
    """For each depth-``k`` cell ``Q``: ``(mu(Q), H(mu^Q, D_scales))`` as flat arrays."""
    rows = _blocks(np.asarray(mu.masses(k + scales)), k, k + scales)
    parent = rows.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = rows / parent[:, None]
        h = -np.where(rows > 0, q * np.log2(q), 0.0).sum(axis=1)
    h[parent <= 0] = 0.0
    return parent, h


def multiscale_entropy(mu: TreeMeasure, n: int, T: int) -> float:
    """Average over scales ``k < n`` of the component entropies at resolution ``T``.

    Returns ``sum_{k<n} sum_{Q in D_k} mu(Q) H(mu^Q, D_T) / T``, which stays
    within ``O(T)`` of ``H(mu, D_n)``.
    """
    if T < 1:
        raise ValueError("T must be positive")
    if n + T > mu.max_depth:
        raise ResolutionError(n + T, mu.max_depth)
    total = 0.0
    for k in range(n):
        w, h = component_entropies(mu, k, T)
        total += float(np.dot(w, h))
    return total / T


def support_cells(mu: TreeMeasure, k: int) -> list[DyadicCell]:
    idx = np.argwhere(mu.masses(k) > 0)
    return [DyadicCell(k, tuple(int(c) for c in row)) for row in idx]


def covering_number(cells: Iterable[DyadicCell], m: int) -> int:
    """Number of distinct depth-``m`` ancestors of ``cells`` (a dyadic stand-in for ``N_delta``, ``delta = 2**-m``).

    Each dyadic cell of side ``delta`` meets at most ``3**dim`` balls of
    diameter ``delta`` in a minimal cover and vice versa, so the count
    brackets the Euclidean covering number up to a dimensional factor.
    """
    seen = set()
    depth = None
    for c in cells:
        if depth is None:
            depth = c.depth
            if m > depth:
                raise ValueError("m must not exceed the cell depth")
        elif c.depth != depth:
            raise ValueError("cells must share a common depth")
        shift = depth - m
        seen.add(tuple(x >> shift for x in c.coords))
    return len(seen)


def mixture(measures: Sequence[TreeMeasure], weights: Sequence[float]) -> TreeMeasure:
    """``sum_i q_i mu_i`` for tree measures of a common shape."""
    if len(measures) != len(weights) or not measures:
        raise ValueError("need nonempty measures with one weight each")
    n = measures[0].max_depth
    arr = np.zeros_like(measures[0].masses(n))
    for mu, q in zip(measures, weights):
        if mu.max_depth != n or mu.dim != measures[0].dim:
            raise ValueError("mixture components must share shape")
        arr = arr + q * mu.masses(n)
    return TreeMeasure(arr)


def translated_masses(mu: TreeMeasure, shift, k: int) -> tuple[tuple[int, ...], np.ndarray]:
    """Masses of ``mu + shift`` on the depth-``k`` cells of ``R**dim``.

    Each finest cell's mass is spread uniformly over the cell, so the
    translate is again a piecewise-uniform density; its finest-level cells
    straddle at most two cells per axis.

    Returns
    -------
    origin : tuple of int
        Integer coordinates (depth ``k``) of the array's first cell.
    masses : ndarray
        Depth-``k`` masses of the translated measure.
    """
    n = mu.max_depth
    if k > n:
        raise ResolutionError(k, n)
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    if shift.shape != (mu.dim,):
        raise ValueError("shift must have one entry per dimension")
    arr = np.array(mu.masses(n))
    origin = []
    for axis, s in enumerate(shift):
        scaled = math.ldexp(float(s), n)
        q = math.floor(scaled)
        f = scaled - q
        if f == 0.0:
            origin.append(q)
            continue
        pad = [(0, 0)] * arr.ndim
        pad[axis] = (0, 1)
        left = np.pad(arr * (1.0 - f), pad)
        pad[axis] = (1, 0)
        right = np.pad(arr * f, pad)
        arr = left + right
        origin.append(q)
    # align origin to the depth-k grid, then coarsen
    r = n - k
    out_origin = []
    for axis, q in enumerate(origin):
        lead = q - ((q >> r) << r)
        size = arr.shape[axis] + lead
        tail = (-size) % (1 << r)
        pad = [(0, 0)] * arr.ndim
        pad[axis] = (lead, tail)
        arr = np.pad(arr, pad)
        out_origin.append(q >> r)
    for axis in range(arr.ndim):
        shape = list(arr.shape)
        shape[axis : axis + 1] = [shape[axis] >> r, 1 << r]
        arr = arr.reshape(shape).sum(axis=axis + 1)
    return tuple(out_origin), arr


def translated_entropy(mu: TreeMeasure, shift, k: int) -> float:
    """``H(mu + shift, D_k)`` under the piecewise-uniform reading of ``mu``."""
    return entropy_bits(translated_masses(mu, shift, k)[1])


def bin_points(points: np.ndarray, weights: np.ndarray, depth: int, chart: Chart | None = None) -> TreeMeasure:
    """Assign each weighted point of ``[0,1)**dim`` to its depth-``depth`` cell.

    Points within rounding error outside the cube (including the closed
    right endpoint of an attractor hull) are clipped to the boundary cells.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    dim = pts.shape[1]
    side = 1 << depth
    idx = np.floor(np.ldexp(pts, depth)).astype(np.int64)
    np.clip(idx, 0, side - 1, out=idx)
    flat = np.ravel_multi_index(tuple(idx.T), (side,) * dim)
    arr = np.bincount(flat, weights=np.asarray(weights, dtype=float), minlength=side**dim)
    return TreeMeasure(arr.reshape((side,) * dim), chart=chart)


# serialization ------------------------------------------------------------
_MAGIC = b"FPTM"
_VERSION = 1


def tree_to_json(mu: TreeMeasure) -> str:
    """Flat record stream ``[depth, [coords...], mass]`` of positive finest cells.

    ``json`` writes floats with ``repr`` so masses round-trip bit-exactly.
    """
    n = mu.max_depth
    arr = mu.masses(n)
    idx = np.argwhere(arr > 0)
    records = [[n, [int(c) for c in row], float(arr[tuple(row)])] for row in idx]
    doc = {"format": "fracproj.tree", "version": _VERSION, "dim": mu.dim, "max_depth": n, "records": records}
    if mu.chart is not None:
        doc["chart"] = {"offset": [float(o) for o in mu.chart.offset], "scale": float(mu.chart.scale)}
    return json.dumps(doc, separators=(",", ":"))


def tree_from_json(text: str) -> TreeMeasure:
    doc = json.loads(text)
    if doc.get("format") != "fracproj.tree":
        raise ValueError("not a serialized tree measure")
    dim, n = doc["dim"], doc["max_depth"]
    arr = np.zeros((1 << n,) * dim)
    for depth, coords, m in doc["records"]:
        if depth != n:
            raise ValueError("records must be at the finest depth")
        arr[tuple(coords)] = m
    chart = None
    if "chart" in doc:
        chart = Chart(tuple(doc["chart"]["offset"]), doc["chart"]["scale"])
    return TreeMeasure(arr, chart=chart)


def tree_to_bytes(mu: TreeMeasure) -> bytes:
    """Binary record stream.

    Layout (little endian): ``b"FPTM"``, u8 version, u8 dim, u32 max_depth,
    u64 record count, then per record u32 depth, ``dim`` x i64 coords and an
    IEEE-754 f64 mass.
    """
    n = mu.max_depth
    arr = mu.masses(n)
    idx = np.argwhere(arr > 0)
    rec = struct.Struct(f"<I{mu.dim}qd")
    parts = [_MAGIC, struct.pack("<BBIQ", _VERSION, mu.dim, n, len(idx))]
    for row in idx:
        parts.append(rec.pack(n, *(int(c) for c in row), float(arr[tuple(row)])))
    return b"".join(parts)


def tree_from_bytes(blob: bytes) -> TreeMeasure:
    if blob[:4] != _MAGIC:
        raise ValueError("not a serialized tree measure")
    version, dim, n, count = struct.unpack_from("<BBIQ", blob, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported version {version}")
    rec = struct.Struct(f"<I{dim}qd")
    arr = np.zeros((1 << n,) * dim)
    off = 4 + struct.calcsize("<BBIQ")
    for _ in range(count):
        depth, *rest = rec.unpack_from(blob, off)
        off += rec.size
        coords, m = rest[:dim], rest[dim]
        if depth != n:
            raise ValueError("records must be at the finest depth")
        arr[tuple(coords)] = m
    return TreeMeasure(arr)


def component_measure(mu: TreeMeasure, cell: DyadicCell) -> TreeMeasure:
    """``mu^D``: restrict to ``cell``, normalize, and rescale onto the unit cube."""
    if cell.dim != mu.dim:
        raise ValueError("cell dimension mismatch")
    if cell.depth > mu.max_depth:
        raise ResolutionError(cell.depth, mu.max_depth)
    m = mu.mass(cell)
    if m <= 0:
        raise EmptyComponentError("empty component")
    n = mu.max_depth
    if cell.depth == n:
        return TreeMeasure(np.ones((1,) * mu.dim))
    r = n - cell.depth
    sl = tuple(slice(c << r, (c + 1) << r) for c in cell.coords)
    return TreeMeasure(np.asarray(mu.masses(n))[sl] / m)
