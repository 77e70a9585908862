"""Traveling salesperson: visit every customer once, return to the depot.

State is (unvisited bitmask, current location). Costs are floor-rounded
Euclidean distances when derived from coordinates; hand-built instances may
carry an explicit (possibly asymmetric) matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..model import (
    BaseCase, Direction, Model, State, StateSchema, Transition, Variable, bits,
)


class InvalidInstanceError(ValueError):
    pass


def euclidean_costs(coords: np.ndarray) -> np.ndarray:
    """Pairwise floor-rounded Euclidean distances, zero diagonal."""
    delta = coords[:, None, :] - coords[None, :, :]
    return np.floor(np.sqrt((delta ** 2).sum(axis=2)))


def check_cost_matrix(costs: np.ndarray) -> None:
    if costs.ndim != 2 or costs.shape[0] != costs.shape[1]:
        raise InvalidInstanceError("cost matrix must be square")
    if costs.shape[0] < 2:
        raise InvalidInstanceError("need a depot and at least one customer")
    if np.any(np.diag(costs) != 0):
        raise InvalidInstanceError("cost matrix diagonal must be zero")
    if np.any(costs < 0) or not np.all(np.isfinite(costs)):
        raise InvalidInstanceError("costs must be finite and nonnegative")


@dataclass(frozen=True, eq=False)
class TspInstance:
    """Coordinates plus a cost matrix; node 0 is the depot."""

    coords: np.ndarray
    costs: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))
        object.__setattr__(self, "costs", np.asarray(self.costs, dtype=float))
        check_cost_matrix(self.costs)
        if self.coords.shape != (self.costs.shape[0], 2):
            raise InvalidInstanceError("coords must be (n, 2) matching the cost matrix")

    @property
    def n(self) -> int:
        return self.costs.shape[0]

    @cached_property
    def min_in(self) -> np.ndarray:
        """Per node, the cheapest incoming edge cost."""
        masked = self.costs + np.where(np.eye(self.n, dtype=bool), np.inf, 0.0)
        return masked.min(axis=0)

    @cached_property
    def min_out(self) -> np.ndarray:
        """Per node, the cheapest outgoing edge cost."""
        masked = self.costs + np.where(np.eye(self.n, dtype=bool), np.inf, 0.0)
        return masked.min(axis=1)


def generate(n: int, seed: int) -> TspInstance:
    """Random instance: n nodes uniform on the [0, 100]^2 grid."""
    if n < 2:
        raise InvalidInstanceError("n must be >= 2")
    coords = draw_coords(np.random.default_rng(seed), n)
    return TspInstance(coords, euclidean_costs(coords))


def draw_coords(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(0.0, 100.0, size=(n, 2))


def incoming_bound(inst: TspInstance):
    """Sum of cheapest incoming edges over unvisited nodes plus the depot."""
    min_in = inst.min_in

    def bound(state: State) -> float:
        unvisited, _ = state
        return min_in[0] + sum(min_in[j] for j in bits(unvisited))

    return bound


def outgoing_bound(inst: TspInstance):
    """Sum of cheapest outgoing edges over unvisited nodes plus the current one."""
    min_out = inst.min_out

    def bound(state: State) -> float:
        unvisited, current = state
        return min_out[current] + sum(min_out[j] for j in bits(unvisited))

    return bound


def dual_bound(inst: TspInstance, state: State) -> float:
    return max(incoming_bound(inst)(state), outgoing_bound(inst)(state))


def build_model(inst: TspInstance) -> Model:
    n = inst.n
    c = inst.costs
    schema = StateSchema((
        Variable("unvisited", "set", n),
        Variable("current", "element", n),
    ))
    all_customers = (1 << n) - 2  # bits 1..n-1

    def visit(j: int) -> Transition:
        jbit = 1 << j
        return Transition(
            tid=f"visit({j})",
            precondition=lambda s, jbit=jbit: bool(s[0] & jbit),
            effect=lambda s, j=j, jbit=jbit: (s[0] ^ jbit, j),
            cost=lambda s, j=j: float(c[s[1], j]),
            parameter=j,
        )

    return Model(
        schema=schema,
        target_state=(all_customers, 0),
        transitions=tuple(visit(j) for j in range(1, n)),
        base_cases=(BaseCase(lambda s: s[0] == 0, lambda s: float(c[s[1], 0])),),
        direction=Direction.MIN,
        dual_bound_terms=(incoming_bound(inst), outgoing_bound(inst)),
        name="tsp",
        context=inst,
    )


def greedy_successor(inst: TspInstance, state: State) -> str | None:
    """Nearest unvisited customer from the current location."""
    unvisited, current = state
    if unvisited == 0:
        return None
    best = min(bits(unvisited), key=lambda j: (inst.costs[current, j], j))
    return f"visit({best})"


N_FEATURES = 4


def extract_features(inst: TspInstance, state: State) -> np.ndarray:
    """Per node: [x/100, y/100, unvisited?, current?]."""
    unvisited, current = state
    n = inst.n
    out = np.empty((n, N_FEATURES))
    out[:, 0:2] = inst.coords / 100.0
    member = np.zeros(n)
    for j in bits(unvisited):
        member[j] = 1.0
    out[:, 2] = member
    out[:, 3] = 0.0
    out[current, 3] = 1.0
    return out
