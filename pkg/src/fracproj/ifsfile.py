"""JSON description files for fixed and parametric IFSs on the line.

Schema (all numbers may be JSON numbers or exact strings such as
``"1/3"`` or ``"(sqrt(5)-1)/2"``)::

    {
      "alphabet": ["0", "1"],                 # optional labels, one per map
      "maps": [                                # fixed IFS: numbers
        {"r": "1/3", "s": "0"},
        {"r": "1/3", "s": "2/3"}
      ],
      "weights": ["1/2", "1/2"],               # optional, uniform by default
      "interval": [0.5, 0.6]                   # parametric files only
    }

In a parametric file ``r`` and ``s`` are coefficient lists of polynomials
in ``t`` (lowest degree first), e.g. ``{"r": [0, 1], "s": [1]}`` for
``x -> t x + 1``.  Contractivity ``|r| < 1`` is checked on the maps, or on
a 257-point grid of the interval for parametric files.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .exact import parse_exact
from .ifs import AffineContraction, WeightedIFS
from .parametric import ParametricFamily, _horner

__all__ = ["parse_number", "load_ifs", "parse_ifs_description", "ifs_to_description"]


def parse_number(v):
    """JSON number or exact string to a number (exact when given as a string or int)."""
    if isinstance(v, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return v
    if isinstance(v, str):
        return parse_exact(v)
    raise ValueError(f"cannot read a number from {v!r}")


def parse_ifs_description(desc: dict | str) -> WeightedIFS | ParametricFamily:
    """Build a :class:`WeightedIFS` or, when coefficients are lists, a :class:`ParametricFamily`.

    Raises
    ------
    ValueError
        Schema violation (message names the offending field) or ``|r| >= 1``.
    """
    if isinstance(desc, str):
        desc = json.loads(desc)
    if not isinstance(desc, dict) or "maps" not in desc:
        raise ValueError("field 'maps': required list of {r, s} objects")
    maps = desc["maps"]
    if not isinstance(maps, list) or not maps:
        raise ValueError("field 'maps': must be a nonempty list")
    if "alphabet" in desc and len(desc["alphabet"]) != len(maps):
        raise ValueError("field 'alphabet': one label per map")
    for j, mp in enumerate(maps):
        if not isinstance(mp, dict) or "r" not in mp or "s" not in mp:
            raise ValueError(f"field 'maps[{j}]': needs keys 'r' and 's'")
    weights = desc.get("weights")
    if weights is not None:
        if len(weights) != len(maps):
            raise ValueError("field 'weights': one weight per map")
        weights = [parse_number(w) for w in weights]
    parametric = any(isinstance(mp["r"], list) or isinstance(mp["s"], list) for mp in maps)
    if not parametric:
        pairs = []
        for j, mp in enumerate(maps):
            r, s = parse_number(mp["r"]), parse_number(mp["s"])
            if r == 0 or abs(r) >= 1:
                raise ValueError(f"field 'maps[{j}].r': need 0 < |r| < 1, got {mp['r']}")
            pairs.append((r, s))
        if weights is not None and any(isinstance(w, float) for w in weights):
            weights = [float(w) for w in weights]
        ifs = WeightedIFS.from_pairs(pairs, weights)
        return ifs
    if "interval" not in desc:
        raise ValueError("field 'interval': required for parametric families")
    lo, hi = (float(parse_number(v)) for v in desc["interval"])
    if not lo < hi:
        raise ValueError("field 'interval': need lo < hi")
    rpolys, spolys = [], []
    for mp in maps:
        rpolys.append([parse_number(c) for c in (mp["r"] if isinstance(mp["r"], list) else [mp["r"]])])
        spolys.append([parse_number(c) for c in (mp["s"] if isinstance(mp["s"], list) else [mp["s"]])])
    for j, rc in enumerate(rpolys):
        vals = [float(_horner(rc, float(t))) for t in np.linspace(lo, hi, 257)]
        if any(v == 0 or abs(v) >= 1 for v in vals):
            raise ValueError(f"field 'maps[{j}].r': |r(t)| must stay in (0, 1) on the interval")
    return ParametricFamily(rpolys, spolys, weights, (lo, hi))


def load_ifs(path: str | Path) -> WeightedIFS | ParametricFamily:
    return parse_ifs_description(Path(path).read_text())


def ifs_to_description(ifs: WeightedIFS) -> dict:
    """Inverse of :func:`parse_ifs_description` for fixed systems (exact values kept as strings)."""

    def enc(v):
        return v if isinstance(v, float) else str(v)

    return {
        "maps": [{"r": enc(f.ratio), "s": enc(f.translation)} for f in ifs.maps],
        "weights": [enc(p) for p in ifs.weights],
    }
