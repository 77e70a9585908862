"""Anytime heuristic search over dynamic-programming models.

Three solvers share one node-expansion core: complete anytime beam search
with doubling widths (solve_cabs), anytime column progressive search over
depth layers (solve_acps), and anytime pack progressive search over
best/current/suspend sets (solve_apps). Correctness never depends on the
guidance evaluator: only the dual-bound prune test, state constraints, and
dominance discard nodes.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

from .model import INF, Direction, Model, State, Transition


def prune_test(g: float, eta: float, incumbent_cost: float | None, direction: Direction) -> bool:
    """True when a node with path cost g and dual bound eta cannot strictly
    improve on the incumbent (boundary equality prunes). Nodes whose bound is
    the unreachable sentinel are always pruned."""
    if eta == direction.unreachable:
        return True
    if incumbent_cost is None:
        return False
    if direction is Direction.MIN:
        return g + eta >= incumbent_cost
    return g + eta <= incumbent_cost


class SearchNode:
    """One reached state plus path bookkeeping for guidance."""

    __slots__ = ("state", "g", "depth", "f", "h", "pi", "g_scaled", "parent",
                 "via", "seq", "alive", "expanded")

    def __init__(self, state: State, g: float, depth: int, f: float, h: float,
                 pi: float, g_scaled: float, parent: "SearchNode | None",
                 via: str | None, seq: int):
        self.state = state
        self.g = g
        self.depth = depth
        self.f = f
        self.h = h
        self.pi = pi
        self.g_scaled = g_scaled
        self.parent = parent
        self.via = via
        self.seq = seq
        self.alive = True
        self.expanded = False

    def sequence(self) -> list[str]:
        out: list[str] = []
        node: SearchNode | None = self
        while node is not None and node.via is not None:
            out.append(node.via)
            node = node.parent
        out.reverse()
        return out


def order_key(node: SearchNode, direction: Direction):
    """Best-first ordering: better f, then deeper, then better h, then FIFO."""
    if direction is Direction.MIN:
        return (node.f, -node.depth, node.h, node.seq)
    return (-node.f, -node.depth, -node.h, node.seq)


@dataclass(frozen=True)
class Incumbent:
    cost: float
    sequence: tuple[str, ...]
    expansions_at_discovery: int


@dataclass(frozen=True)
class SolveResult:
    best: Incumbent | None
    proved_optimal: bool
    expansions: int
    generated: int
    anytime_trace: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class SearchLimits:
    max_expansions: int | None = None
    max_time: float | None = None

    def __post_init__(self) -> None:
        if self.max_expansions is not None and self.max_expansions < 0:
            raise ValueError("max_expansions must be nonnegative")
        if self.max_time is not None and self.max_time <= 0:
            raise ValueError("max_time must be positive")


@dataclass
class RegisterOutcome:
    inserted: bool
    replaced: list[SearchNode] = field(default_factory=list)


class DominanceRegistry:
    """Pareto registry over (resource variables, g) keyed by the remaining
    state variables. With no declared resources this degenerates to exact
    duplicate detection keeping the better g (ties keep the earlier node)."""

    def __init__(self, model: Model):
        self._direction = model.direction
        self._resources = model.resources
        self._indices = frozenset(r.index for r in model.resources)
        self._entries: dict[tuple, list[SearchNode]] = {}

    def _key(self, state: State) -> tuple:
        if not self._indices:
            return state
        return tuple(v for i, v in enumerate(state) if i not in self._indices)

    def _vector(self, node: SearchNode) -> tuple:
        """Comparison vector, smaller-is-better in every component."""
        out = []
        for r in self._resources:
            v = node.state[r.index]
            out.append(v if r.smaller_better else -v)
        out.append(node.g if self._direction is Direction.MIN else -node.g)
        return tuple(out)

    def register_or_dominate(self, node: SearchNode) -> RegisterOutcome:
        key = self._key(node.state)
        entries = self._entries.setdefault(key, [])
        vec = self._vector(node)
        for other in entries:
            if all(a <= b for a, b in zip(self._vector(other), vec)):
                return RegisterOutcome(inserted=False)
        replaced = [o for o in entries if all(b <= a for a, b in zip(self._vector(o), vec))]
        for other in replaced:
            entries.remove(other)
            other.alive = False
        entries.append(node)
        return RegisterOutcome(inserted=True, replaced=replaced)


class _Budget:
    def __init__(self, limits: SearchLimits | None):
        limits = limits or SearchLimits()
        self._max_expansions = limits.max_expansions
        self._deadline = None if limits.max_time is None else time.monotonic() + limits.max_time
        self.expansions = 0
        self.generated = 0

    def exhausted(self) -> bool:
        if self._max_expansions is not None and self.expansions >= self._max_expansions:
            return True
        return self._deadline is not None and time.monotonic() >= self._deadline


class _Run:
    """Shared incumbent, trace, and counters across one solve call."""

    def __init__(self, model: Model, evaluator, limits: SearchLimits | None,
                 prune: bool, dominance: bool):
        self.model = model
        self.direction = model.direction
        self.evaluator = evaluator
        self.budget = _Budget(limits)
        self.prune = prune
        self.dominance = dominance
        self.incumbent: Incumbent | None = None
        self.trace: list[tuple[int, float]] = []
        self.counter = itertools.count()

    def root(self) -> SearchNode:
        return SearchNode(self.model.target_state, 0.0, 0, 0.0, 0.0, 1.0, 0.0,
                          None, None, next(self.counter))

    def incumbent_cost(self) -> float | None:
        return None if self.incumbent is None else self.incumbent.cost

    def offer(self, node: SearchNode, base_cost: float) -> None:
        total = node.g + base_cost
        if self.incumbent is None or self.direction.better(total, self.incumbent.cost):
            self.incumbent = Incumbent(total, tuple(node.sequence()), self.budget.expansions)
            self.trace.append((self.budget.expansions, total))

    def check_root(self, root: SearchNode) -> bool:
        """Handle constraint violation and base case at the root. Returns True
        when the root should be expanded further."""
        if not self.model.satisfies_constraints(root.state):
            return False
        base = self.model.base_cost(root.state)
        if base is not None:
            self.offer(root, base)
            return False
        return True

    def expand(self, node: SearchNode) -> list[SearchNode]:
        """Generate surviving children of `node`: state constraints, base-case
        incumbent updates, and the dual-bound prune test are applied here."""
        model = self.model
        node.expanded = True
        self.budget.expansions += 1
        raw = []
        for t in model.applicable(node.state):
            child_state = t.effect(node.state)
            child_g = node.g + float(t.cost(node.state))
            self.budget.generated += 1
            if not model.satisfies_constraints(child_state):
                continue
            base = model.base_cost(child_state)
            if base is not None:
                probe = SearchNode(child_state, child_g, node.depth + 1, 0.0, 0.0,
                                   node.pi, node.g_scaled, node, t.tid, next(self.counter))
                self.offer(probe, base)
                continue
            eta = model.dual_bound(child_state)
            if self.prune and prune_test(child_g, eta, self.incumbent_cost(), self.direction):
                continue
            raw.append((t, child_state, child_g, eta))
        if not raw:
            return []
        evals = self.evaluator.evaluate_children(model, node, raw)
        children = []
        for (t, child_state, child_g, _), ev in zip(raw, evals):
            children.append(SearchNode(child_state, child_g, node.depth + 1, ev.f, ev.h,
                                       ev.pi, ev.g_scaled, node, t.tid, next(self.counter)))
        return children

    def result(self, proved_optimal: bool) -> SolveResult:
        return SolveResult(self.incumbent, proved_optimal, self.budget.expansions,
                           self.budget.generated, tuple(self.trace))


def beam_search_once(model: Model, evaluator, width: int,
                     incumbent: Incumbent | None = None,
                     limits: SearchLimits | None = None,
                     prune: bool = True, dominance: bool = True,
                     _run: _Run | None = None) -> tuple[Incumbent | None, bool, SolveResult]:
    """One beam search pass with a fixed width.

    Returns (incumbent, complete, stats). `complete` is True iff no node was
    discarded by the width cap, so a complete pass proves the incumbent
    optimal (or the model infeasible when there is none). Dominance and
    duplicate merges do not clear the flag: a dominating entry is only ever a
    retained node, so it is either expanded or its own width-cap discard
    clears the flag.
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    run = _run or _Run(model, evaluator, limits, prune, dominance)
    if run.incumbent is None and incumbent is not None:
        run.incumbent = incumbent
        run.trace.append((run.budget.expansions, incumbent.cost))
    complete = True
    root = run.root()
    if not run.check_root(root):
        return run.incumbent, True, run.result(True)
    registry = DominanceRegistry(model) if dominance else None
    layer = [root]
    while layer:
        if run.budget.exhausted():
            return run.incumbent, False, run.result(False)
        candidates: list[SearchNode] = []
        for node in layer:
            if run.budget.exhausted():
                complete = False
                break
            for child in run.expand(node):
                if registry is not None:
                    if not registry.register_or_dominate(child).inserted:
                        continue
                candidates.append(child)
        survivors = [n for n in candidates if n.alive]
        if len(survivors) > width:
            survivors.sort(key=lambda n: order_key(n, run.direction))
            for dropped in survivors[width:]:
                dropped.alive = False
            survivors = survivors[:width]
            complete = False
        layer = survivors
    return run.incumbent, complete, run.result(complete)


def solve_cabs(model: Model, evaluator, limits: SearchLimits | None = None,
               prune: bool = True, dominance: bool = True,
               initial_width: int = 1) -> SolveResult:
    """Complete anytime beam search: repeated beam passes with doubling width,
    carrying the incumbent, until a pass is complete or limits run out."""
    run = _Run(model, evaluator, limits, prune, dominance)
    width = initial_width
    while True:
        _, complete, _ = beam_search_once(model, evaluator, width, _run=run)
        if complete:
            return run.result(True)
        if run.budget.exhausted():
            return run.result(False)
        width *= 2


def _register(registry: DominanceRegistry | None, child: SearchNode) -> tuple[bool, int]:
    """Register a child; returns (inserted, open nodes killed by replacement)."""
    if registry is None:
        return True, 0
    outcome = registry.register_or_dominate(child)
    if not outcome.inserted:
        return False, 0
    return True, sum(1 for r in outcome.replaced if not r.expanded)


def solve_acps(model: Model, evaluator, limits: SearchLimits | None = None,
               prune: bool = True, dominance: bool = True) -> SolveResult:
    """Anytime column progressive search.

    Open nodes are partitioned into layers by depth. Each visit to a layer
    expands its best `b` nodes; when the scan passes the deepest non-empty
    layer, b grows by one and the scan restarts at depth 0. Finding a new
    best solution also restarts the scan. Optimality is proved when every
    layer is empty.
    """
    run = _Run(model, evaluator, limits, prune, dominance)
    root = run.root()
    if not run.check_root(root):
        return run.result(True)
    registry = DominanceRegistry(model) if dominance else None
    if registry is not None:
        registry.register_or_dominate(root)
    layers: list[list[SearchNode]] = [[root]]
    alive_open = 1
    budget = 1
    i = 0
    while True:
        if alive_open == 0:
            return run.result(True)
        if run.budget.exhausted():
            return run.result(False)
        if i >= len(layers):
            budget += 1
            i = 0
            continue
        layer = [n for n in layers[i] if n.alive]
        layers[i] = layer
        if not layer:
            i += 1
            continue
        layer.sort(key=lambda n: order_key(n, run.direction))
        batch = layer[:budget]
        layers[i] = layer[budget:]
        before = run.incumbent_cost()
        for node in batch:
            if not node.alive:
                continue
            if run.budget.exhausted():
                return run.result(False)
            alive_open -= 1
            for child in run.expand(node):
                inserted, killed = _register(registry, child)
                alive_open -= killed
                if not inserted:
                    continue
                while len(layers) <= child.depth:
                    layers.append([])
                layers[child.depth].append(child)
                alive_open += 1
        i = 0 if run.incumbent_cost() != before else i + 1


def solve_apps(model: Model, evaluator, limits: SearchLimits | None = None,
               prune: bool = True, dominance: bool = True) -> SolveResult:
    """Anytime pack progressive search.

    Expands everything in a best set; the best `b` successors form the next
    best set and the rest are suspended. When the best set empties, the best
    `b` suspended nodes are promoted and b grows by one. Optimality is proved
    when all three sets are empty.
    """
    run = _Run(model, evaluator, limits, prune, dominance)
    root = run.root()
    if not run.check_root(root):
        return run.result(True)
    registry = DominanceRegistry(model) if dominance else None
    if registry is not None:
        registry.register_or_dominate(root)
    best: list[SearchNode] = [root]
    suspended: list[SearchNode] = []
    budget = 1
    while True:
        best = [n for n in best if n.alive]
        if not best:
            suspended = [n for n in suspended if n.alive]
            if not suspended:
                return run.result(True)
            if run.budget.exhausted():
                return run.result(False)
            suspended.sort(key=lambda n: order_key(n, run.direction))
            best, suspended = suspended[:budget], suspended[budget:]
            budget += 1
            continue
        if run.budget.exhausted():
            return run.result(False)
        children: list[SearchNode] = []
        for node in best:
            if not node.alive:
                continue
            if run.budget.exhausted():
                return run.result(False)
            for child in run.expand(node):
                inserted, _ = _register(registry, child)
                if inserted:
                    children.append(child)
        children = [n for n in children if n.alive]
        children.sort(key=lambda n: order_key(n, run.direction))
        best = children[:budget]
        suspended.extend(children[budget:])


SOLVERS = {"cabs": solve_cabs, "acps": solve_acps, "apps": solve_apps}


def solve(algorithm: str, model: Model, evaluator, **kwargs) -> SolveResult:
    try:
        fn = SOLVERS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {sorted(SOLVERS)}") from None
    return fn(model, evaluator, **kwargs)
