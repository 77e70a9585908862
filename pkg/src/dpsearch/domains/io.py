"""Instance files: one JSON document per instance with explicit field names."""

from __future__ import annotations

import json
from pathlib import Path

from .knapsack import KnapsackInstance
from .portfolio import PortfolioInstance
from .tsp import InvalidInstanceError, TspInstance
from .tsptw import TsptwInstance


def instance_to_dict(tag: str, inst) -> dict:
    if tag == "tsp":
        return {"domain": tag, "coords": inst.coords.tolist(), "costs": inst.costs.tolist()}
    if tag == "tsptw":
        return {
            "domain": tag,
            "coords": inst.coords.tolist(),
            "costs": inst.costs.tolist(),
            "window_open": inst.window_open.tolist(),
            "window_close": inst.window_close.tolist(),
        }
    if tag == "knapsack":
        return {
            "domain": tag,
            "weights": inst.weights.tolist(),
            "profits": inst.profits.tolist(),
            "budget": inst.budget,
        }
    if tag == "portfolio":
        return {
            "domain": tag,
            "weights": inst.weights.tolist(),
            "mu": inst.mu.tolist(),
            "sigma": inst.sigma.tolist(),
            "gamma": inst.gamma.tolist(),
            "kappa": inst.kappa.tolist(),
            "lambdas": list(inst.lambdas),
            "budget": inst.budget,
        }
    raise InvalidInstanceError(f"unknown domain tag {tag!r}")


def instance_from_dict(doc: dict):
    """Return (domain_tag, instance); validation happens in the constructors."""
    try:
        tag = doc["domain"]
        if tag == "tsp":
            return tag, TspInstance(doc["coords"], doc["costs"])
        if tag == "tsptw":
            return tag, TsptwInstance(
                doc["coords"], doc["costs"], doc["window_open"], doc["window_close"]
            )
        if tag == "knapsack":
            return tag, KnapsackInstance(doc["weights"], doc["profits"], doc["budget"])
        if tag == "portfolio":
            return tag, PortfolioInstance(
                doc["weights"], doc["mu"], doc["sigma"], doc["gamma"],
                doc["kappa"], tuple(doc["lambdas"]), doc["budget"],
            )
    except KeyError as exc:
        raise InvalidInstanceError(f"instance document missing field {exc}") from None
    raise InvalidInstanceError(f"unknown domain tag {tag!r}")


def save_instance(tag: str, inst, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(instance_to_dict(tag, inst), indent=1))
    return path


def load_instance(path: str | Path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInstanceError(f"not a valid instance file: {exc}") from None
    if not isinstance(doc, dict):
        raise InvalidInstanceError("instance file must hold a JSON object")
    return instance_from_dict(doc)
