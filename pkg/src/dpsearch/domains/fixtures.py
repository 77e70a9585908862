"""Tiny hand-checkable instances used by tests and the CLI.

Routing fixtures carry explicit asymmetric cost matrices (so they exercise
non-Euclidean inputs) together with synthetic distinct coordinates for
feature extraction.
"""

from __future__ import annotations

import numpy as np

from .knapsack import KnapsackInstance
from .portfolio import PortfolioInstance
from .tsp import TspInstance
from .tsptw import TsptwInstance

_TRIANGLE_COORDS = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
_TRIANGLE_COSTS = np.array([
    [0.0, 1.0, 5.0],
    [5.0, 0.0, 2.0],
    [1.0, 5.0, 0.0],
])


def fix_tsp3() -> TspInstance:
    """Three nodes; optimal tour visit(1), visit(2) costs 4, the other 15."""
    return TspInstance(_TRIANGLE_COORDS.copy(), _TRIANGLE_COSTS.copy())


def fix_tsptw3() -> TsptwInstance:
    """fix_tsp3 plus windows that force customer 1 first (b_1 = 1); cost 4."""
    return TsptwInstance(
        _TRIANGLE_COORDS.copy(),
        _TRIANGLE_COSTS.copy(),
        np.array([0.0, 0.0, 0.0]),
        np.array([100.0, 1.0, 100.0]),
    )


def fix_kp2() -> KnapsackInstance:
    """Items (w, p) = (2, 3), (3, 4), budget 4; optimum 4 by taking item 1."""
    return KnapsackInstance(np.array([2.0, 3.0]), np.array([3.0, 4.0]), 4)


def fix_pf2() -> PortfolioInstance:
    """Mean-only portfolio mirroring fix_kp2; optimum 4."""
    return PortfolioInstance(
        weights=np.array([2.0, 3.0]),
        mu=np.array([3.0, 4.0]),
        sigma=np.array([1.0, 1.0]),
        gamma=np.array([1.0, 1.0]),
        kappa=np.array([1.0, 1.0]),
        lambdas=(1.0, 0.0, 0.0, 0.0),
        budget=4,
    )


FIXTURES = {
    "fix-tsp3": ("tsp", fix_tsp3),
    "fix-tsptw3": ("tsptw", fix_tsptw3),
    "fix-kp2": ("knapsack", fix_kp2),
    "fix-pf2": ("portfolio", fix_pf2),
}


def fixture(name: str):
    """Return (domain_tag, instance) for a named fixture."""
    try:
        tag, factory = FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {sorted(FIXTURES)}") from None
    return tag, factory()
