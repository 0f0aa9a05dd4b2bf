"""Shared helpers for the test suite."""

import numpy as np
import pytest
from hypothesis import strategies as st

from fracproj.dyadic import TreeMeasure


def random_tree(rng: np.random.Generator, depth: int, dim: int = 1, sparsity: float = 0.3) -> TreeMeasure:
    """A probability tree with random finest masses and some empty cells."""
    arr = rng.random((1 << depth,) * dim) ** 3
    arr[rng.random(arr.shape) < sparsity] = 0.0
    if arr.sum() == 0:
        arr.flat[0] = 1.0
    return TreeMeasure(arr / arr.sum())


@st.composite
def trees(draw, max_depth: int = 8, dim: int = 1):
    depth = draw(st.integers(1, max_depth))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_tree(np.random.default_rng(seed), depth, dim)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance lines recorded by tests/test_acceptance.py: (criterion, part, passed, detail)
ACCEPTANCE: list[tuple[int, str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    by_criterion: dict[int, list] = {}
    for num, part, ok, detail in ACCEPTANCE:
        by_criterion.setdefault(num, []).append((part, ok, detail))
    for num in sorted(by_criterion):
        parts = by_criterion[num]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{part}: {'ok' if ok else 'FAILED'} ({d})" for part, ok, d in parts)
        terminalreporter.write_line(f"{verdict} criterion {num}: {detail}")
