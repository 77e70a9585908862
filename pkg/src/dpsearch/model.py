"""Declarative dynamic-programming models over typed state tuples.

A model is a tuple of state variables, a target (initial) state, grounded
transitions, base cases, state constraints, and dual-bound functions, with an
optimization direction. States are plain tuples: element variables are ints,
set variables are int bitmasks, numeric variables are floats. Unreachable
values are the IEEE infinity of the appropriate sign, and arithmetic with them
saturates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterator

INF = math.inf

State = tuple


class ModelError(Exception):
    """Base class for model construction and evaluation errors."""


class MalformedStateError(ModelError):
    """State tuple does not conform to the variable schema."""


class PreconditionError(ModelError):
    """Transition applied or costed at a state where its precondition fails."""


class UnknownTransitionError(ModelError):
    """Transition id not declared by the model."""


class OracleTooLargeError(ModelError):
    """exact_value visited more states than its cap allows."""


class Direction(Enum):
    """Optimization direction. MIN treats +inf as unreachable, MAX -inf."""

    MIN = "min"
    MAX = "max"

    @property
    def unreachable(self) -> float:
        return INF if self is Direction.MIN else -INF

    def better(self, a: float, b: float) -> bool:
        """True when a is strictly better than b in this direction."""
        return a < b if self is Direction.MIN else a > b

    def best(self, values: list[float]) -> float:
        return min(values) if self is Direction.MIN else max(values)

    def combine_bounds(self, values: list[float]) -> float:
        """Tightest of several one-sided bounds (max of lower, min of upper)."""
        return max(values) if self is Direction.MIN else min(values)


@dataclass(frozen=True)
class Variable:
    """One state variable.

    kind is "element" (int in [0, domain)), "set" (bitmask over a universe of
    `domain` bits), or "numeric" (float within the closed range `domain`,
    default unbounded).
    """

    name: str
    kind: str
    domain: Any = None

    def __post_init__(self) -> None:
        if self.kind not in ("element", "set", "numeric"):
            raise ModelError(f"unknown variable kind {self.kind!r}")
        if self.kind in ("element", "set"):
            if not isinstance(self.domain, int) or self.domain <= 0:
                raise ModelError(f"variable {self.name}: domain must be a positive int")

    def check(self, value: Any) -> str | None:
        """Return a failure reason, or None when the value conforms."""
        if self.kind == "element":
            if not isinstance(value, int) or isinstance(value, bool):
                return f"{self.name}: element value must be int, got {type(value).__name__}"
            if not 0 <= value < self.domain:
                return f"{self.name}: element {value} outside [0, {self.domain})"
        elif self.kind == "set":
            if not isinstance(value, int) or isinstance(value, bool):
                return f"{self.name}: set value must be an int bitmask"
            if value < 0 or value >> self.domain:
                return f"{self.name}: bitmask {value:#x} has bits outside the universe"
        else:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                return f"{self.name}: numeric value must be a number"
            if not math.isfinite(float(value)):
                return f"{self.name}: numeric value must be finite"
            if self.domain is not None:
                lo, hi = self.domain
                if not lo <= value <= hi:
                    return f"{self.name}: {value} outside [{lo}, {hi}]"
        return None


@dataclass(frozen=True)
class StateSchema:
    variables: tuple[Variable, ...]

    def conforms(self, state: State) -> str | None:
        """Return a failure reason, or None when the state conforms."""
        if not isinstance(state, tuple) or len(state) != len(self.variables):
            return f"state must be a tuple of {len(self.variables)} values"
        for var, value in zip(self.variables, state):
            reason = var.check(value)
            if reason is not None:
                return reason
        return None

    def require(self, state: State) -> None:
        reason = self.conforms(state)
        if reason is not None:
            raise MalformedStateError(reason)


def bits(mask: int) -> Iterator[int]:
    """Iterate set-bit indices of a bitmask, ascending."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class Transition:
    """Grounded transition: precondition, effect, cost, optional forced flag.

    `parameter` records the grounding index of a transition family (the
    customer visited, or 0/1 for skip/take); action mappings rely on it.
    """

    tid: str
    precondition: Callable[[State], bool]
    effect: Callable[[State], State]
    cost: Callable[[State], float]
    parameter: int | None = None
    forced: bool = False


@dataclass(frozen=True)
class BaseCase:
    condition: Callable[[State], bool]
    cost: Callable[[State], float]


@dataclass(frozen=True)
class Resource:
    """Dominance declaration: state variable index and preferred direction."""

    index: int
    smaller_better: bool = True


@dataclass(frozen=True)
class SolutionCheck:
    """Outcome of validate_solution. Steps are 1-indexed."""

    valid: bool
    cost: float | None = None
    failed_step: int | None = None
    reason: str | None = None


class InvalidSolutionError(ModelError):
    def __init__(self, check: SolutionCheck):
        self.check = check
        super().__init__(f"invalid solution at step {check.failed_step}: {check.reason}")


@dataclass(frozen=True)
class Model:
    """A dynamic-programming model. Immutable after construction."""

    schema: StateSchema
    target_state: State
    transitions: tuple[Transition, ...]
    base_cases: tuple[BaseCase, ...]
    direction: Direction
    state_constraints: tuple[Callable[[State], bool], ...] = ()
    dual_bound_terms: tuple[Callable[[State], float], ...] = ()
    resources: tuple[Resource, ...] = ()
    name: str = ""
    context: Any = None
    _by_id: dict = field(init=False, repr=False, compare=False, hash=False, default=None)

    def __post_init__(self) -> None:
        self.schema.require(self.target_state)
        by_id: dict[str, Transition] = {}
        for t in self.transitions:
            if t.tid in by_id:
                raise ModelError(f"duplicate transition id {t.tid!r}")
            by_id[t.tid] = t
        object.__setattr__(self, "_by_id", by_id)

    # -- transitions -------------------------------------------------------

    def resolve(self, transition: Transition | str) -> Transition:
        if isinstance(transition, Transition):
            return transition
        t = self._by_id.get(transition)
        if t is None:
            raise UnknownTransitionError(f"unknown transition {transition!r}")
        return t

    def applicable(self, state: State) -> list[Transition]:
        """Transitions applicable at `state`, in declaration order.

        If any forced transition's precondition holds, the first such forced
        transition is the only one returned.
        """
        self.schema.require(state)
        out = []
        for t in self.transitions:
            if t.precondition(state):
                if t.forced:
                    return [t]
                out.append(t)
        return out

    def applicable_transitions(self, state: State) -> list[str]:
        return [t.tid for t in self.applicable(state)]

    def apply_transition(self, state: State, transition: Transition | str) -> State:
        t = self.resolve(transition)
        self.schema.require(state)
        if not t.precondition(state):
            raise PreconditionError(f"{t.tid} not applicable at {state}")
        nxt = t.effect(state)
        reason = self.schema.conforms(nxt)
        if reason is not None:
            raise MalformedStateError(f"{t.tid} produced a malformed state: {reason}")
        return nxt

    def transition_cost(self, state: State, transition: Transition | str) -> float:
        t = self.resolve(transition)
        self.schema.require(state)
        if not t.precondition(state):
            raise PreconditionError(f"{t.tid} not applicable at {state}")
        return float(t.cost(state))

    # -- states ------------------------------------------------------------

    def satisfies_constraints(self, state: State) -> bool:
        return all(c(state) for c in self.state_constraints)

    def base_cost(self, state: State) -> float | None:
        """Best base-case cost at `state`, or None when no base case holds."""
        self.schema.require(state)
        costs = [float(b.cost(state)) for b in self.base_cases if b.condition(state)]
        if not costs:
            return None
        return self.direction.best(costs)

    def dual_bound(self, state: State) -> float:
        """Combined dual bound eta(s): the tightest declared bound.

        With no declared bounds this is the trivial bound (-inf for MIN,
        +inf for MAX), which never prunes.
        """
        if not self.dual_bound_terms:
            return -self.direction.unreachable
        return self.direction.combine_bounds([float(f(state)) for f in self.dual_bound_terms])

    # -- solutions ---------------------------------------------------------

    def validate_solution(self, sequence: list[Transition | str]) -> SolutionCheck:
        """Check a transition sequence from the target state.

        Valid iff every visited state satisfies the state constraints, every
        transition is in the applicable set of its predecessor (this enforces
        forced-transition semantics), and the final state is a base state.
        The reported cost is the transition-cost sum plus the base-case cost.
        """
        state = self.target_state
        total = 0.0
        for step, item in enumerate(sequence, start=1):
            if not self.satisfies_constraints(state):
                return SolutionCheck(False, None, step, "state violates a state constraint")
            try:
                t = self.resolve(item)
            except UnknownTransitionError:
                return SolutionCheck(False, None, step, f"unknown transition {item!r}")
            if t not in self.applicable(state):
                return SolutionCheck(False, None, step, f"{t.tid} not applicable")
            total += float(t.cost(state))
            state = t.effect(state)
            reason = self.schema.conforms(state)
            if reason is not None:
                return SolutionCheck(False, None, step, f"malformed state: {reason}")
        final_step = len(sequence) + 1
        if not self.satisfies_constraints(state):
            return SolutionCheck(False, None, final_step, "state violates a state constraint")
        base = self.base_cost(state)
        if base is None:
            return SolutionCheck(False, None, final_step, "not a base state")
        return SolutionCheck(True, total + base)

    def solution_cost(self, sequence: list[Transition | str]) -> float:
        check = self.validate_solution(sequence)
        if not check.valid:
            raise InvalidSolutionError(check)
        return check.cost

    # -- exact evaluation ----------------------------------------------------

    def exact_value_table(self, state: State | None = None, max_states: int = 1_000_000) -> dict[State, float]:
        """Memoized Bellman values for every state reachable from `state`.

        Intended as a small-instance oracle. Raises OracleTooLargeError past
        `max_states` memo entries and ModelError on cyclic reachable graphs.
        """
        root = self.target_state if state is None else state
        self.schema.require(root)
        memo: dict[State, float] = {}
        on_path: set[State] = set()
        unreachable = self.direction.unreachable

        def visit(s: State) -> float:
            got = memo.get(s)
            if got is not None:
                return got
            if s in on_path:
                raise ModelError("cycle detected in the reachable state graph")
            if len(memo) >= max_states:
                raise OracleTooLargeError(f"exact_value exceeded {max_states} states")
            if not self.satisfies_constraints(s):
                memo[s] = unreachable
                return unreachable
            base = self.base_cost(s)
            if base is not None:
                memo[s] = base
                return base
            on_path.add(s)
            value = unreachable
            for t in self.applicable(s):
                child = visit(t.effect(s))
                if child == unreachable:
                    continue
                total = float(t.cost(s)) + child
                if value == unreachable or self.direction.better(total, value):
                    value = total
            on_path.discard(s)
            memo[s] = value
            return value

        visit(root)
        return memo

    def exact_value(self, state: State | None = None, max_states: int = 1_000_000) -> float:
        root = self.target_state if state is None else state
        return self.exact_value_table(root, max_states)[root]
