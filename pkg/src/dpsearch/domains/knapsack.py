"""0-1 knapsack, items considered one by one in descending profit-ratio order.

State is (consumed weight, next item index); transitions are take/skip and
the objective maximizes packed profit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..model import (
    BaseCase, Direction, Model, State, StateSchema, Transition, Variable,
)
from .tsp import InvalidInstanceError

PROFIT_SHIFT = 10


@dataclass(frozen=True, eq=False)
class KnapsackInstance:
    weights: np.ndarray
    profits: np.ndarray
    budget: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "profits", np.asarray(self.profits, dtype=float))
        w, p = self.weights, self.profits
        if w.ndim != 1 or p.shape != w.shape or w.size == 0:
            raise InvalidInstanceError("weights and profits must be equal-length vectors")
        if np.any(w <= 0) or np.any(p <= 0):
            raise InvalidInstanceError("weights and profits must be positive")
        if not self.budget < w.sum():
            raise InvalidInstanceError("budget must be below the total weight")
        ratios = p / w
        if np.any(ratios[:-1] < ratios[1:]):
            raise InvalidInstanceError("items must be sorted by descending profit ratio")

    @property
    def n(self) -> int:
        return self.weights.size

    @cached_property
    def suffix_profit(self) -> np.ndarray:
        """suffix_profit[i] = total profit of items i..n-1; entry n is 0."""
        out = np.zeros(self.n + 1)
        out[:-1] = self.profits[::-1].cumsum()[::-1]
        return out

    @cached_property
    def suffix_ratio(self) -> np.ndarray:
        """suffix_ratio[i] = best profit ratio among items i..n-1; entry n is 0."""
        out = np.zeros(self.n + 1)
        out[:-1] = np.maximum.accumulate((self.profits / self.weights)[::-1])[::-1]
        return out


def generate(n: int, seed: int) -> KnapsackInstance:
    """Strongly correlated instance: integer w ~ U(1,100), p = w + 10,
    budget = ceil(half the total weight), items ratio-sorted."""
    if n < 1:
        raise InvalidInstanceError("n must be >= 1")
    rng = np.random.default_rng(seed)
    w = rng.integers(1, 101, size=n).astype(float)
    p = w + PROFIT_SHIFT
    order = np.lexsort((np.arange(n), -(p / w)))
    w, p = w[order], p[order]
    return KnapsackInstance(w, p, int(np.ceil(0.5 * w.sum())))


def remaining_profit_bound(inst: KnapsackInstance):
    suffix = inst.suffix_profit

    def bound(state: State) -> float:
        return float(suffix[state[1]])

    return bound


def best_ratio_bound(inst: KnapsackInstance):
    suffix = inst.suffix_ratio
    budget = inst.budget

    def bound(state: State) -> float:
        x, i = state
        return float(suffix[i] * (budget - x))

    return bound


def dual_bound(inst: KnapsackInstance, state: State) -> float:
    return min(remaining_profit_bound(inst)(state), best_ratio_bound(inst)(state))


def build_model(inst: KnapsackInstance) -> Model:
    n = inst.n
    w = inst.weights
    p = inst.profits
    budget = float(inst.budget)
    schema = StateSchema((
        Variable("weight", "numeric", (0.0, budget)),
        Variable("item", "element", n + 1),
    ))
    take = Transition(
        tid="take",
        precondition=lambda s: s[1] < n and s[0] + w[s[1]] <= budget,
        effect=lambda s: (s[0] + w[s[1]], s[1] + 1),
        cost=lambda s: float(p[s[1]]),
        parameter=1,
    )
    skip = Transition(
        tid="skip",
        precondition=lambda s: s[1] < n,
        effect=lambda s: (s[0], s[1] + 1),
        cost=lambda s: 0.0,
        parameter=0,
    )
    return Model(
        schema=schema,
        target_state=(0.0, 0),
        transitions=(take, skip),
        base_cases=(BaseCase(lambda s: s[1] >= n, lambda s: 0.0),),
        direction=Direction.MAX,
        dual_bound_terms=(remaining_profit_bound(inst), best_ratio_bound(inst)),
        name="knapsack",
        context=inst,
    )


def greedy_successor(inst: KnapsackInstance, state: State) -> str | None:
    """Take the current item iff it fits (items are already ratio-sorted)."""
    x, i = state
    if i >= inst.n:
        return None
    return "take" if x + inst.weights[i] <= inst.budget else "skip"


N_FEATURES = 8


def extract_features(inst: KnapsackInstance, state: State) -> np.ndarray:
    """Per item: weight, profit, both ratios, remaining capacity after taking,
    already-decided?, current?, would-exceed?; magnitudes scaled to O(1)."""
    x, i = state
    w, p = inst.weights, inst.profits
    budget = float(inst.budget)
    n = inst.n
    out = np.empty((n, N_FEATURES))
    out[:, 0] = w / budget
    out[:, 1] = p / p.max()
    ratio = p / w
    out[:, 2] = (w / p) / (w / p).max()
    out[:, 3] = ratio / ratio.max()
    out[:, 4] = (budget - x - w) / budget
    idx = np.arange(n)
    out[:, 5] = (idx < i).astype(float)
    out[:, 6] = (idx == i).astype(float)
    out[:, 7] = (x + w > budget).astype(float)
    return out
