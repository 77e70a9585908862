"""Reinforcement-learning view of a dynamic-programming model.

States are shared with the model; each grounded transition is one action
(its `parameter` is the action index), inapplicable actions are masked, and
state constraints are deliberately not carried over. Episodes end at base
states or when nothing is applicable. Rewards are the reward-scaled
transition costs, negated for minimization, with the base-case cost folded
into the final step so that the episode return of a completed rollout equals
the scaled solution cost exactly. TSPTW adds a constant per-step bonus large
enough that completing all visits always beats stopping early.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import domains
from .domains import UnsupportedDomainError
from .model import Direction, Model, State

REWARD_SCALE = {"tsp": 1e-3, "tsptw": 1e-3, "knapsack": 1e-4, "portfolio": 1e-4}


class InvalidActionError(ValueError):
    pass


def completion_bonus(tag: str, instance) -> float:
    """Unscaled per-step bonus; nonzero only for TSPTW, where it must strictly
    dominate any possible tour cost: (n+1) * max c + 1 over n legs."""
    if tag != "tsptw":
        return 0.0
    return float((instance.n + 1) * instance.costs.max() + 1.0)


@dataclass
class Mdp:
    model: Model
    tag: str
    instance: object
    n_actions: int
    beta: float
    step_bonus: float
    _tid_of_action: dict[int, str]
    _action_of_tid: dict[str, int]

    @property
    def initial_state(self) -> State:
        return self.model.target_state

    def action_of(self, tid: str) -> int:
        try:
            return self._action_of_tid[tid]
        except KeyError:
            raise InvalidActionError(f"transition {tid!r} has no action mapping") from None

    def tid_of(self, action: int) -> str:
        try:
            return self._tid_of_action[action]
        except KeyError:
            raise InvalidActionError(f"action {action} has no transition mapping") from None

    def mask(self, state: State) -> np.ndarray:
        out = np.zeros(self.n_actions, dtype=bool)
        for t in self.model.applicable(state):
            out[t.parameter] = True
        return out

    def features(self, state: State) -> np.ndarray:
        return domains.extract_features(self.tag, self.instance, state)

    def terminal(self, state: State) -> bool:
        return self.model.base_cost(state) is not None or not self.mask(state).any()

    def reward(self, cost: float, next_state: State) -> float:
        sign = -1.0 if self.model.direction is Direction.MIN else 1.0
        r = self.step_bonus + sign * cost
        base = self.model.base_cost(next_state)
        if base is not None:
            r += sign * base
        return self.beta * r

    def step(self, state: State, action: int) -> tuple[State, float, bool, np.ndarray]:
        """Apply an unmasked action: (next_state, reward, terminal, next_mask)."""
        chosen = None
        for t in self.model.applicable(state):
            if t.parameter == action:
                chosen = t
                break
        if chosen is None:
            raise InvalidActionError(f"action {action} is masked at {state}")
        cost = float(chosen.cost(state))
        nxt = chosen.effect(state)
        r = self.reward(cost, nxt)
        mask = self.mask(nxt)
        terminal = self.model.base_cost(nxt) is not None or not mask.any()
        return nxt, r, terminal, mask


def build_mdp(model: Model, domain_tag: str, beta: float | None = None) -> Mdp:
    """Derive the MDP for a domain model built by domains.build_model."""
    if domain_tag not in domains.DOMAIN_TAGS:
        raise UnsupportedDomainError(f"unknown domain {domain_tag!r}")
    instance = model.context
    if instance is None:
        raise UnsupportedDomainError("model carries no instance context")
    if domain_tag in ("tsp", "tsptw"):
        n_actions = instance.n
    else:
        n_actions = 2
    tid_of_action = {}
    for t in model.transitions:
        if t.parameter is None or not 0 <= t.parameter < n_actions:
            raise UnsupportedDomainError(f"transition {t.tid!r} has no valid action index")
        if t.parameter in tid_of_action:
            raise UnsupportedDomainError(f"duplicate action index {t.parameter}")
        tid_of_action[t.parameter] = t.tid
    return Mdp(
        model=model,
        tag=domain_tag,
        instance=instance,
        n_actions=n_actions,
        beta=REWARD_SCALE[domain_tag] if beta is None else beta,
        step_bonus=completion_bonus(domain_tag, instance),
        _tid_of_action=tid_of_action,
        _action_of_tid={tid: a for a, tid in tid_of_action.items()},
    )
