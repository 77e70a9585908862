"""Four-moment portfolio optimization under a budget.

Investments are considered in index order with take/skip transitions. The
objective value of a selection Y combines its mean, deviation, skewness and
kurtosis terms:

    nu(Y) = lam1*sum(mu) - lam2*sqrt(sum(sigma^2))
          + lam3*cbrt(sum(gamma^3)) - lam4*(sum(kappa^4))^(1/4)

Transition costs are the marginal nu(Y + {i}) - nu(Y), which telescopes to
nu(final Y); they can be negative.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..model import (
    BaseCase, Direction, Model, State, StateSchema, Transition, Variable, bits,
)
from .tsp import InvalidInstanceError


@dataclass(frozen=True, eq=False)
class PortfolioInstance:
    weights: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray
    kappa: np.ndarray
    lambdas: tuple[float, float, float, float]
    budget: int

    def __post_init__(self) -> None:
        for name in ("weights", "mu", "sigma", "gamma", "kappa"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        w = self.weights
        if w.ndim != 1 or w.size == 0:
            raise InvalidInstanceError("weights must be a nonempty vector")
        for name in ("mu", "sigma", "gamma", "kappa"):
            arr = getattr(self, name)
            if arr.shape != w.shape:
                raise InvalidInstanceError(f"{name} must match the weights vector")
            if np.any(arr <= 0):
                raise InvalidInstanceError(f"{name} entries must be positive")
        if np.any(w <= 0):
            raise InvalidInstanceError("weights must be positive")
        if len(self.lambdas) != 4 or any(v < 0 for v in self.lambdas):
            raise InvalidInstanceError("lambdas must be four nonnegative values")
        if not self.budget < w.sum():
            raise InvalidInstanceError("budget must be below the total weight")

    @property
    def n(self) -> int:
        return self.weights.size

    @cached_property
    def suffix_mean_skew(self) -> np.ndarray:
        """suffix[i] = lam1*sum(mu_j) + lam3*cbrt(sum(gamma_j^3)) over j >= i."""
        lam1, _, lam3, _ = self.lambdas
        mu_tail = np.zeros(self.n + 1)
        mu_tail[:-1] = self.mu[::-1].cumsum()[::-1]
        g3_tail = np.zeros(self.n + 1)
        g3_tail[:-1] = (self.gamma ** 3)[::-1].cumsum()[::-1]
        return lam1 * mu_tail + lam3 * np.cbrt(g3_tail)

    @cached_property
    def suffix_efficiency(self) -> np.ndarray:
        """suffix[i] = max over j >= i of (lam1*mu_j + lam3*gamma_j)/w_j; entry n is 0."""
        lam1, _, lam3, _ = self.lambdas
        k = (lam1 * self.mu + lam3 * self.gamma) / self.weights
        out = np.zeros(self.n + 1)
        out[:-1] = np.maximum.accumulate(k[::-1])[::-1]
        return out


def objective(inst: PortfolioInstance, selection: int) -> float:
    """nu of a selection bitmask."""
    idx = list(bits(selection))
    if not idx:
        return 0.0
    lam1, lam2, lam3, lam4 = inst.lambdas
    return float(
        lam1 * inst.mu[idx].sum()
        - lam2 * np.sqrt((inst.sigma[idx] ** 2).sum())
        + lam3 * np.cbrt((inst.gamma[idx] ** 3).sum())
        - lam4 * ((inst.kappa[idx] ** 4).sum()) ** 0.25
    )


DEFAULT_LAMBDAS = (1.0, 5.0, 5.0, 5.0)


def generate(n: int, seed: int, lambdas: tuple[float, float, float, float] = DEFAULT_LAMBDAS) -> PortfolioInstance:
    """Random instance: integer w ~ U(1,100), moments ~ U(0,100), budget half
    the total weight, investments sorted by descending efficiency."""
    if n < 1:
        raise InvalidInstanceError("n must be >= 1")
    rng = np.random.default_rng(seed)
    w = rng.integers(1, 101, size=n).astype(float)
    mu, sigma, gamma, kappa = (rng.uniform(0.0, 100.0, size=n) for _ in range(4))
    lam1, lam2, lam3, lam4 = lambdas
    eff = (lam1 * mu - lam2 * sigma + lam3 * gamma - lam4 * kappa) / w
    order = np.lexsort((np.arange(n), -eff))
    return PortfolioInstance(
        w[order], mu[order], sigma[order], gamma[order], kappa[order],
        lambdas, int(np.ceil(0.5 * w.sum())),
    )


def mean_skew_bound(inst: PortfolioInstance):
    """Upper bound from the positive objective terms of the remaining items."""
    suffix = inst.suffix_mean_skew

    def bound(state: State) -> float:
        return float(suffix[state[1]])

    return bound


def efficiency_bound(inst: PortfolioInstance):
    """Upper bound from the best positive-term efficiency times spare budget."""
    suffix = inst.suffix_efficiency
    budget = inst.budget

    def bound(state: State) -> float:
        x, i, _ = state
        return float(suffix[i] * (budget - x))

    return bound


def dual_bound(inst: PortfolioInstance, state: State) -> float:
    return min(mean_skew_bound(inst)(state), efficiency_bound(inst)(state))


def build_model(inst: PortfolioInstance) -> Model:
    n = inst.n
    w = inst.weights
    budget = float(inst.budget)
    schema = StateSchema((
        Variable("weight", "numeric", (0.0, budget)),
        Variable("item", "element", n + 1),
        Variable("selected", "set", n),
    ))
    take = Transition(
        tid="take",
        precondition=lambda s: s[1] < n and s[0] + w[s[1]] <= budget,
        effect=lambda s: (s[0] + w[s[1]], s[1] + 1, s[2] | (1 << s[1])),
        cost=lambda s: objective(inst, s[2] | (1 << s[1])) - objective(inst, s[2]),
        parameter=1,
    )
    skip = Transition(
        tid="skip",
        precondition=lambda s: s[1] < n,
        effect=lambda s: (s[0], s[1] + 1, s[2]),
        cost=lambda s: 0.0,
        parameter=0,
    )
    return Model(
        schema=schema,
        target_state=(0.0, 0, 0),
        transitions=(take, skip),
        base_cases=(BaseCase(lambda s: s[1] >= n, lambda s: 0.0),),
        direction=Direction.MAX,
        dual_bound_terms=(mean_skew_bound(inst), efficiency_bound(inst)),
        name="portfolio",
        context=inst,
    )


def greedy_successor(inst: PortfolioInstance, state: State) -> str | None:
    """Take iff it fits; generated instances are efficiency-sorted so this is
    the efficiency-order greedy."""
    x, i, _ = state
    if i >= inst.n:
        return None
    return "take" if x + inst.weights[i] <= inst.budget else "skip"


N_FEATURES = 9


def extract_features(inst: PortfolioInstance, state: State) -> np.ndarray:
    """Per investment: weight and the four moment columns L2-normalized,
    remaining capacity after taking, decided?, current?, would-exceed?."""
    x, i, _ = state
    n = inst.n
    out = np.empty((n, N_FEATURES))
    for col, arr in enumerate((inst.weights, inst.mu, inst.sigma, inst.gamma, inst.kappa)):
        out[:, col] = arr / np.linalg.norm(arr)
    wnorm = np.linalg.norm(inst.weights)
    out[:, 5] = (inst.budget - x - inst.weights) / wnorm
    idx = np.arange(n)
    out[:, 6] = (idx < i).astype(float)
    out[:, 7] = (idx == i).astype(float)
    out[:, 8] = (x + inst.weights > inst.budget).astype(float)
    return out
