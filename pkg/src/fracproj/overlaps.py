"""Exact overlap search: distinct words with the same contraction map."""

from __future__ import annotations

import itertools
from collections import defaultdict

from .errors import BudgetExceededError
from .exact import as_exact
from .ifs import WeightedIFS, Word

__all__ = ["exact_overlap_search"]


def exact_overlap_search(ifs: WeightedIFS, n: int, budget: int = 1 << 20) -> list[tuple[Word, Word]]:
    """All pairs ``I < J`` of equal length ``<= n`` with ``f_I == f_J`` exactly.

    Equality of maps means ``r_I == r_J`` and ``f_I(0) == f_J(0)``, decided in
    exact arithmetic (rationals or a single quadratic field).

    Raises
    ------
    TypeError
        Some coefficient is a float ("exact arithmetic required").
    BudgetExceededError
        More than ``budget`` words would be enumerated.
    """
    maps = [(as_exact(f.ratio), as_exact(f.translation)) for f in ifs.maps]
    m = len(maps)
    if sum(m**k for k in range(1, n + 1)) > budget:
        raise BudgetExceededError(budget)
    out: list[tuple[Word, Word]] = []
    # level-by-level: (word, r_I, s_I) extended on the right
    level = [((), 1, 0)]
    for _ in range(n):
        nxt = []
        for sym, r, s in level:
            for i, (ri, si) in enumerate(maps):
                nxt.append((sym + (i,), r * ri, s + r * si))
        level = nxt
        groups: dict[tuple, list] = defaultdict(list)
        for sym, r, s in level:
            groups[(r, s)].append(sym)
        for words in groups.values():
            for a, b in itertools.combinations(sorted(words), 2):
                out.append((Word(a), Word(b)))
    return out
