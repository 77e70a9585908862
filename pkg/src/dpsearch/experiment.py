"""Benchmark harness: run solver/guidance grids over generated instances,
sample randomized solutions, and export results as CSV and JSON."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import domains
from .guidance import (
    DualBoundGuidance, GreedyRolloutGuidance, PolicyGuidance, ValueNetGuidance,
    ZeroHGuidance,
)
from .mdp import build_mdp
from .model import Direction, Model
from .nn import NetworkParams, load_params
from .search import SOLVERS, SearchLimits, SearchNode, solve

SCHEMA_VERSION = 1

GUIDANCE_NAMES = ("dual", "zero", "greedy", "dqn", "ppo")


def compute_gap(cost: float | None, best: float) -> float:
    """Relative gap in percent against the batch-best cost.

    A method that produced no solution scores 100. A zero best cost has no
    well-defined relative gap and is rejected.
    """
    if best == 0:
        raise ValueError("relative gap is undefined for a best cost of zero")
    if cost is None:
        return 100.0
    return abs(cost - best) / abs(best) * 100.0


def make_evaluator(name: str, model: Model, domain_tag: str, instance,
                   params: NetworkParams | None = None, seed: int = 0):
    """Build one of the five guidance evaluators for a concrete instance.

    `dqn` and `ppo` take trained parameters; without them a seeded random
    initialization is used (ordering quality then carries no meaning, but
    search results stay correct).
    """
    if name == "dual":
        return DualBoundGuidance()
    if name == "zero":
        return ZeroHGuidance()
    if name == "greedy":
        policy = lambda state: domains.greedy_successor(domain_tag, instance, state)
        return GreedyRolloutGuidance(policy, relaxed=domains.greedy_is_relaxed(domain_tag))
    if name in ("dqn", "ppo"):
        from .training import TrainConfig, make_network

        mdp = build_mdp(model, domain_tag)
        if params is None:
            kind = "q" if name == "dqn" else "actor"
            params = make_network(domain_tag, kind, TrainConfig(), mdp.n_actions, seed)
        if name == "dqn":
            return ValueNetGuidance(mdp, params)
        return PolicyGuidance(mdp, params=params)
    raise ValueError(f"unknown guidance {name!r}; expected one of {GUIDANCE_NAMES}")


@dataclass(frozen=True)
class ExperimentConfig:
    domain: str
    n: int = 6
    instances: int = 3
    seed: int = 0
    algorithms: tuple[str, ...] = ("cabs",)
    guidances: tuple[str, ...] = ("dual",)
    max_expansions: int | None = 20000
    max_time: float | None = None
    net_seed: int = 0
    beta: float | None = None
    sample_count: int = 1280
    sample_temperature: float = 1.0
    weight_paths: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if self.domain not in domains.DOMAIN_TAGS:
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.instances <= 0 or self.n <= 0:
            raise ValueError("instances and n must be positive")
        if self.sample_count <= 0 or self.sample_temperature <= 0:
            raise ValueError("sample_count and sample_temperature must be positive")
        for a in self.algorithms:
            if a not in SOLVERS:
                raise ValueError(f"unknown algorithm {a!r}")
        for g, _ in self.weight_paths:
            if g not in ("dqn", "ppo"):
                raise ValueError(f"weight files apply to dqn/ppo guidance, not {g!r}")
        for g in self.guidances:
            if g not in GUIDANCE_NAMES:
                raise ValueError(f"unknown guidance {g!r}")


@dataclass(frozen=True)
class RunRecord:
    kind: str
    domain: str
    instance_id: str
    n: int
    seed: int
    algorithm: str
    guidance: str
    cost: float | None
    proved_optimal: bool
    expansions: int
    generated: int
    wall_time: float
    gap: float | None
    trace: tuple[tuple[int, float], ...]


def instance_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence((base_seed, index)).generate_state(1)[0])


def run_search_experiment(config: ExperimentConfig,
                          params: dict[str, NetworkParams] | None = None,
                          reference_costs: dict[str, float] | None = None) -> list[RunRecord]:
    """Run every algorithm x guidance pair on each generated instance.

    Gaps are computed against the best cost observed for the instance across
    all pairs, or against `reference_costs[instance_id]` when provided.
    Everything except `wall_time` is deterministic in the config.
    """
    params = dict(params or {})
    for guidance_name, path in config.weight_paths:
        if guidance_name not in params:
            loaded = load_params(path)
            if loaded.domain != config.domain:
                raise ValueError(
                    f"weights in {path} were trained for domain {loaded.domain!r}, "
                    f"expected {config.domain!r}")
            params[guidance_name] = loaded
    limits = SearchLimits(max_expansions=config.max_expansions, max_time=config.max_time)
    records: list[RunRecord] = []
    for index in range(config.instances):
        seed = instance_seed(config.seed, index)
        instance = domains.generate_instance(config.domain, config.n, seed)
        model = domains.build_model(config.domain, instance)
        instance_id = f"{config.domain}-n{config.n}-i{index}"
        batch: list[RunRecord] = []
        for guidance_name in config.guidances:
            evaluator = make_evaluator(guidance_name, model, config.domain, instance,
                                       params=params.get(guidance_name), seed=config.net_seed)
            for algorithm in config.algorithms:
                start = time.perf_counter()
                result = solve(algorithm, model, evaluator, limits=limits)
                wall = time.perf_counter() - start
                cost = result.best.cost if result.best is not None else None
                batch.append(RunRecord(
                    kind="run", domain=config.domain, instance_id=instance_id,
                    n=config.n, seed=seed, algorithm=algorithm, guidance=guidance_name,
                    cost=cost, proved_optimal=result.proved_optimal,
                    expansions=result.expansions, generated=result.generated,
                    wall_time=wall, gap=None, trace=result.anytime_trace))
        if reference_costs is not None and instance_id in reference_costs:
            best = reference_costs[instance_id]
        else:
            found = [r.cost for r in batch if r.cost is not None]
            best = model.direction.best(found) if found else None
        for record in batch:
            gap = compute_gap(record.cost, best) if best is not None else 100.0
            records.append(replace(record, gap=gap))
    return records


# -- randomized solution sampling ---------------------------------------------


@dataclass(frozen=True)
class SampleResult:
    count: int
    feasible: int
    best: float | None
    costs: tuple[float, ...]


def _root_node(model: Model) -> SearchNode:
    return SearchNode(state=model.target_state, g=0.0, depth=0, f=0.0, h=0.0,
                      pi=1.0, g_scaled=0.0, parent=None, via=None, seq=0)


def sample_solve(model: Model, evaluator, count: int = 1280, temperature: float = 1.0,
                 seed: int = 0, step_cap: int | None = None) -> SampleResult:
    """Draw `count` randomized rollouts from the target state.

    At each state the successors are weighted by softmax(-h / T) for Minimize
    and softmax(h / T) for Maximize, except for a policy evaluator whose
    successors are weighted by their accumulated probability raised to 1/T.
    Successors violating a state constraint are excluded; a state with no
    remaining successor and no base case ends the rollout infeasibly.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    from .guidance import rollout_horizon

    cap = rollout_horizon(model) if step_cap is None else step_cap
    rng = np.random.default_rng(seed)
    policy_weighted = getattr(evaluator, "name", "") == "ppo"
    sign = -1.0 if model.direction is Direction.MIN else 1.0
    costs: list[float] = []
    root_ok = model.satisfies_constraints(model.target_state)
    for _ in range(count):
        if not root_ok:
            break
        node = _root_node(model)
        for _ in range(cap):
            base = model.base_cost(node.state)
            if base is not None:
                costs.append(node.g + base)
                break
            raw = []
            for t in model.applicable(node.state):
                child_state = model.apply_transition(node.state, t)
                if not model.satisfies_constraints(child_state):
                    continue
                child_g = node.g + model.transition_cost(node.state, t)
                raw.append((t, child_state, child_g, model.dual_bound(child_state)))
            if not raw:
                break
            evals = evaluator.evaluate_children(model, node, raw)
            if policy_weighted:
                weights = np.array([ev.pi for ev in evals]) ** (1.0 / temperature)
            else:
                scores = np.array([sign * ev.h for ev in evals]) / temperature
                finite = np.isfinite(scores)
                if not finite.any():
                    break
                shifted = np.where(finite, scores - scores[finite].max(), -np.inf)
                weights = np.where(finite, np.exp(shifted), 0.0)
            total = weights.sum()
            if total <= 0:
                break
            pick = int(rng.choice(len(raw), p=weights / total))
            t, child_state, child_g, _ = raw[pick]
            ev = evals[pick]
            node = SearchNode(state=child_state, g=child_g, depth=node.depth + 1,
                              f=ev.f, h=ev.h, pi=ev.pi, g_scaled=ev.g_scaled,
                              parent=node, via=t.tid, seq=0)
    best = model.direction.best(costs) if costs else None
    return SampleResult(count=count, feasible=len(costs), best=best, costs=tuple(costs))


# -- persistence ---------------------------------------------------------------


_CSV_COLUMNS = ("schema_version", "kind", "instance", "method", "expansions",
                "cost", "gap", "proved_optimal", "wall_ms")


def export_results(records: list[RunRecord], csv_path: str | Path | None = None,
                   json_path: str | Path | None = None) -> None:
    """Write run records.

    The CSV carries one `run` row per record plus long-format `trace` rows
    (one per anytime-trace point, reusing the expansions/cost columns); the
    JSON mirrors RunRecord exactly and round-trips through load_results.
    """
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=_CSV_COLUMNS)
            writer.writeheader()
            for r in records:
                common = dict(schema_version=SCHEMA_VERSION, instance=r.instance_id,
                              method=f"{r.algorithm}/{r.guidance}")
                writer.writerow({**common, "kind": "run", "expansions": r.expansions,
                                 "cost": "" if r.cost is None else repr(r.cost),
                                 "gap": "" if r.gap is None else repr(r.gap),
                                 "proved_optimal": int(r.proved_optimal),
                                 "wall_ms": repr(r.wall_time * 1000.0)})
                for expansions, cost in r.trace:
                    writer.writerow({**common, "kind": "trace",
                                     "expansions": expansions, "cost": repr(cost),
                                     "gap": "", "proved_optimal": "", "wall_ms": ""})
    if json_path is not None:
        doc = {"schema_version": SCHEMA_VERSION,
               "records": [asdict(r) for r in records]}
        with open(json_path, "w") as fh:
            json.dump(doc, fh, indent=1)


def load_results(json_path: str | Path) -> list[RunRecord]:
    with open(json_path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported results document in {json_path}")
    out = []
    for raw in doc["records"]:
        raw = dict(raw)
        raw["trace"] = tuple((int(e), float(c)) for e, c in raw["trace"])
        out.append(RunRecord(**raw))
    return out
