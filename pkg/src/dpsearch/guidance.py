"""Guidance evaluators: they order search nodes and never affect correctness.

Every evaluator consumes the successors of one expanded node in a single call
(the value network runs one batched forward pass per expansion, the policy
network exactly one forward pass at the expanded node) and produces an f
value per child plus the bookkeeping the next expansion needs (accumulated
policy probability, scaled path cost).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import INF, Direction, Model, State
from .nn import NetworkParams, forward

PI_FLOOR = 1e-9


@dataclass(frozen=True)
class ChildEval:
    f: float
    h: float
    pi: float = 1.0
    g_scaled: float = 0.0


def f_dual(g: float, eta: float) -> float:
    """f = g + eta with saturating infinities."""
    return g + eta


def f_policy(g: float, eta: float, pi_acc: float, direction: Direction) -> float:
    """Policy-weighted priority: (g + eta) * pi for Maximize, / pi for Minimize."""
    base = g + eta
    if direction is Direction.MIN:
        return base / pi_acc
    return base * pi_acc


class DualBoundGuidance:
    """f = g + eta(s'), h = eta."""

    name = "dual"

    def evaluate_children(self, model: Model, parent, raw) -> list[ChildEval]:
        return [ChildEval(f=f_dual(g, eta), h=eta) for (_, _, g, eta) in raw]


class ZeroHGuidance:
    """f = g; ordering by path cost alone (pruning still uses the dual bound)."""

    name = "zero"

    def evaluate_children(self, model: Model, parent, raw) -> list[ChildEval]:
        return [ChildEval(f=g, h=0.0) for (_, _, g, _) in raw]


class MalformedPolicyError(RuntimeError):
    pass


def rollout_horizon(model: Model) -> int:
    """Step cap for rollouts, derived from the state schema."""
    cap = 16
    for var in model.schema.variables:
        if var.kind in ("element", "set"):
            cap += var.domain
    return cap


def h_greedy_rollout(model: Model, state: State, greedy_policy, relaxed: bool = False,
                     horizon: int | None = None) -> float:
    """Cost of the path from `state` to a base case under a greedy policy.

    The policy returns a transition id or None; None (or an inapplicable
    choice when not `relaxed`) is a dead end and yields the unreachable
    sentinel. Relaxed mode applies effects without precondition checks, for
    policies that deliberately ignore them.
    """
    cap = rollout_horizon(model) if horizon is None else horizon
    total = 0.0
    for _ in range(cap):
        base = model.base_cost(state)
        if base is not None:
            return total + base
        tid = greedy_policy(state)
        if tid is None:
            return model.direction.unreachable
        t = model.resolve(tid)
        if not relaxed and not t.precondition(state):
            return model.direction.unreachable
        total += float(t.cost(state))
        state = t.effect(state)
    raise MalformedPolicyError(f"rollout exceeded {cap} steps without reaching a base case")


class GreedyRolloutGuidance:
    """f = g + rollout cost under a domain greedy policy."""

    name = "greedy"

    def __init__(self, greedy_policy, relaxed: bool = False):
        self.greedy_policy = greedy_policy
        self.relaxed = relaxed

    def evaluate_children(self, model: Model, parent, raw) -> list[ChildEval]:
        out = []
        for (_, state, g, _) in raw:
            h = h_greedy_rollout(model, state, self.greedy_policy, self.relaxed)
            out.append(ChildEval(f=g + h, h=h))
        return out


class ValueNetGuidance:
    """f in reward-scaled units: scaled path cost plus the value estimate.

    The estimate at a child state is max over its applicable actions of the
    Q network's outputs; base states use the scaled base cost exactly; states
    with no applicable action and no base case get the pruning sentinel.
    """

    name = "dqn"

    def __init__(self, mdp, params: NetworkParams, beta: float | None = None):
        self.mdp = mdp
        self.params = params
        self.beta = mdp.beta if beta is None else beta

    def value(self, state: State) -> float:
        """Network value of a non-base state; -inf when nothing is applicable."""
        mask = self.mdp.mask(state)
        if not mask.any():
            return -INF
        q = forward(self.params, self.mdp.features(state), mask)
        return float(q[mask].max())

    def evaluate_children(self, model: Model, parent, raw) -> list[ChildEval]:
        beta = self.beta
        sign = -1.0 if model.direction is Direction.MIN else 1.0
        out = []
        feats = []
        masks = []
        pending = []
        for idx, (t, state, g, _) in enumerate(raw):
            g_scaled = parent.g_scaled + beta * (g - parent.g)
            base = model.base_cost(state)
            if base is not None:
                out.append(ChildEval(f=g_scaled + beta * base, h=beta * base, g_scaled=g_scaled))
                continue
            mask = self.mdp.mask(state)
            if not mask.any():
                sentinel = INF if model.direction is Direction.MIN else -INF
                out.append(ChildEval(f=sentinel, h=sentinel, g_scaled=g_scaled))
                continue
            feats.append(self.mdp.features(state))
            masks.append(mask)
            pending.append((len(out), g_scaled))
            out.append(None)
        if pending:
            batch = np.stack(feats)
            q = forward(self.params, batch, np.stack(masks))
            for (slot, g_scaled), qrow, mask in zip(pending, q, masks):
                v = float(qrow[mask].max())
                h = sign * v
                out[slot] = ChildEval(f=g_scaled + h, h=h, g_scaled=g_scaled)
        return out


class PolicyGuidance:
    """f from the accumulated policy probability along the path.

    One network call per expanded node yields an action distribution; each
    child's step probability is the distribution entry of the action mapped
    to its transition, floored at PI_FLOOR, as is the accumulated product.
    """

    name = "ppo"

    def __init__(self, mdp, params: NetworkParams | None = None, policy_fn=None):
        if params is None and policy_fn is None:
            raise ValueError("PolicyGuidance needs params or an injected policy_fn")
        self.mdp = mdp
        self.params = params
        self._policy_fn = policy_fn

    def _distribution(self, state: State) -> np.ndarray:
        mask = self.mdp.mask(state)
        if self._policy_fn is not None:
            return np.asarray(self._policy_fn(state, mask), dtype=float)
        return forward(self.params, self.mdp.features(state), mask)

    def evaluate_children(self, model: Model, parent, raw) -> list[ChildEval]:
        probs = self._distribution(parent.state)
        out = []
        for (t, state, g, eta) in raw:
            action = self.mdp.action_of(t.tid)
            step = max(float(probs[action]), PI_FLOOR)
            pi_acc = max(parent.pi * step, PI_FLOOR)
            out.append(ChildEval(f=f_policy(g, eta, pi_acc, model.direction), h=eta, pi=pi_acc))
        return out


def perfect_evaluator(model: Model):
    """f = g + exact value: an oracle evaluator for tests on tiny models."""
    table = model.exact_value_table()

    class _Perfect:
        name = "perfect"

        def evaluate_children(self, m, parent, raw):
            out = []
            for (_, state, g, _) in raw:
                v = table.get(state)
                if v is None:
                    v = m.exact_value(state)
                out.append(ChildEval(f=g + v, h=v))
            return out

    return _Perfect()
