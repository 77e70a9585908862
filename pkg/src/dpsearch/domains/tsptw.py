"""TSP with time windows: arrive at customer j within [a_j, b_j], waiting allowed.

State is (unvisited bitmask, current location, time). A state is pruned when
some unvisited customer can no longer be reached before its deadline, using
true shortest-path travel times so floor-rounded costs never cause a
window-feasible tour to be discarded.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..model import (
    BaseCase, Direction, Model, Resource, State, StateSchema, Transition,
    Variable, bits,
)
from .tsp import (
    InvalidInstanceError, TspInstance, check_cost_matrix, draw_coords,
    euclidean_costs, incoming_bound, outgoing_bound,
)

WINDOW_WIDTH = 100.0
WINDOW_OFFSET = 1000.0


@dataclass(frozen=True, eq=False)
class TsptwInstance:
    """Coordinates, cost matrix, and per-node time windows [a, b]; a[0] = 0."""

    coords: np.ndarray
    costs: np.ndarray
    window_open: np.ndarray
    window_close: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))
        object.__setattr__(self, "costs", np.asarray(self.costs, dtype=float))
        object.__setattr__(self, "window_open", np.asarray(self.window_open, dtype=float))
        object.__setattr__(self, "window_close", np.asarray(self.window_close, dtype=float))
        check_cost_matrix(self.costs)
        n = self.costs.shape[0]
        if self.coords.shape != (n, 2):
            raise InvalidInstanceError("coords must be (n, 2) matching the cost matrix")
        if self.window_open.shape != (n,) or self.window_close.shape != (n,):
            raise InvalidInstanceError("windows must be length-n vectors")
        if np.any(self.window_open < 0) or np.any(self.window_open > self.window_close):
            raise InvalidInstanceError("windows must satisfy 0 <= a_i <= b_i")
        if self.window_open[0] != 0:
            raise InvalidInstanceError("depot window must open at 0")

    @property
    def n(self) -> int:
        return self.costs.shape[0]

    @cached_property
    def shortest(self) -> np.ndarray:
        """All-pairs shortest travel times over the cost matrix."""
        d = self.costs.copy()
        n = self.n
        for k in range(n):
            d = np.minimum(d, d[:, k, None] + d[None, k, :])
        return d

    def as_tsp(self) -> TspInstance:
        return TspInstance(self.coords, self.costs)


def generate(n: int, seed: int) -> TsptwInstance:
    return generate_with_reference(n, seed)[0]


def generate_with_reference(n: int, seed: int) -> tuple[TsptwInstance, list[str]]:
    """Random instance with windows drawn around a feasible reference tour.

    Coordinates consume the RNG exactly as the plain TSP generator does, so
    tsp and tsptw instances with equal seeds share a cost matrix. Arrival
    times along a random reference permutation set the windows (each opens at
    or before the reference arrival), which keeps that tour feasible. The
    reference visiting sequence is returned alongside the instance.
    """
    if n < 2:
        raise InvalidInstanceError("n must be >= 2")
    rng = np.random.default_rng(seed)
    coords = draw_coords(rng, n)
    costs = euclidean_costs(coords)
    order = rng.permutation(np.arange(1, n))
    window_open = np.zeros(n)
    window_close = np.zeros(n)
    t = 0.0
    prev = 0
    for j in order:
        t += costs[prev, j]
        window_open[j] = max(0.0, t - rng.uniform(0.0, WINDOW_OFFSET))
        window_close[j] = t + rng.uniform(1.0, WINDOW_WIDTH)
        prev = j
    window_close[0] = t + costs[prev, 0] + WINDOW_OFFSET
    inst = TsptwInstance(coords, costs, window_open, window_close)
    return inst, [f"visit({j})" for j in order]


def build_model(inst: TsptwInstance) -> Model:
    n = inst.n
    c = inst.costs
    a = inst.window_open
    b = inst.window_close
    cstar = inst.shortest
    schema = StateSchema((
        Variable("unvisited", "set", n),
        Variable("current", "element", n),
        Variable("time", "numeric"),
    ))
    all_customers = (1 << n) - 2

    def visit(j: int) -> Transition:
        jbit = 1 << j
        return Transition(
            tid=f"visit({j})",
            precondition=lambda s, j=j, jbit=jbit: bool(s[0] & jbit) and s[2] + c[s[1], j] <= b[j],
            effect=lambda s, j=j, jbit=jbit: (s[0] ^ jbit, j, max(s[2] + c[s[1], j], a[j])),
            cost=lambda s, j=j: float(c[s[1], j]),
            parameter=j,
        )

    def all_reachable(s: State) -> bool:
        unvisited, current, t = s
        return all(t + cstar[current, j] <= b[j] for j in bits(unvisited))

    return Model(
        schema=schema,
        target_state=(all_customers, 0, 0.0),
        transitions=tuple(visit(j) for j in range(1, n)),
        base_cases=(BaseCase(lambda s: s[0] == 0, lambda s: float(c[s[1], 0])),),
        direction=Direction.MIN,
        state_constraints=(all_reachable,),
        dual_bound_terms=(
            _lift(incoming_bound(inst.as_tsp())),
            _lift(outgoing_bound(inst.as_tsp())),
        ),
        resources=(Resource(index=2, smaller_better=True),),
        name="tsptw",
        context=inst,
    )


def _lift(tsp_bound):
    """Adapt a (unvisited, current) bound to the (unvisited, current, t) state."""
    return lambda s: tsp_bound((s[0], s[1]))


def dual_bound(inst: TsptwInstance, state: State) -> float:
    flat = (state[0], state[1])
    tsp = inst.as_tsp()
    return max(incoming_bound(tsp)(flat), outgoing_bound(tsp)(flat))


def greedy_successor(inst: TsptwInstance, state: State) -> str | None:
    """Unvisited customer with the earliest possible service start; windows are
    otherwise ignored, so the choice may violate a deadline."""
    unvisited, current, t = state
    if unvisited == 0:
        return None
    best = min(
        bits(unvisited),
        key=lambda j: (max(t + inst.costs[current, j], inst.window_open[j]), j),
    )
    return f"visit({best})"

GREEDY_RELAXED = True

N_FEATURES = 6


def extract_features(inst: TsptwInstance, state: State) -> np.ndarray:
    """Per node: [x/100, y/100, unvisited?, current?, a/scale, b/scale]."""
    unvisited, current, _ = state
    n = inst.n
    scale = max(float(inst.window_close.max()), 1.0)
    out = np.empty((n, N_FEATURES))
    out[:, 0:2] = inst.coords / 100.0
    member = np.zeros(n)
    for j in bits(unvisited):
        member[j] = 1.0
    out[:, 2] = member
    out[:, 3] = 0.0
    out[current, 3] = 1.0
    out[:, 4] = inst.window_open / scale
    out[:, 5] = inst.window_close / scale
    return out
