"""Benchmark domains and the tag-dispatched registry used by the bench CLI."""

from __future__ import annotations

from ..model import Model, State
from . import knapsack, portfolio, tsp, tsptw
from .fixtures import FIXTURES, fixture
from .io import instance_from_dict, instance_to_dict, load_instance, save_instance
from .tsp import InvalidInstanceError

_MODULES = {"tsp": tsp, "tsptw": tsptw, "knapsack": knapsack, "portfolio": portfolio}

DOMAIN_TAGS = tuple(_MODULES)


class UnsupportedDomainError(ValueError):
    pass


def _module(tag: str):
    try:
        return _MODULES[tag]
    except KeyError:
        raise UnsupportedDomainError(
            f"unknown domain {tag!r}; expected one of {sorted(_MODULES)}"
        ) from None


def build_model(tag: str, instance) -> Model:
    return _module(tag).build_model(instance)


def generate_instance(tag: str, n: int, seed: int):
    return _module(tag).generate(n, seed)


def dual_bound(tag: str, instance, state: State) -> float:
    return _module(tag).dual_bound(instance, state)


def greedy_successor(tag: str, instance, state: State) -> str | None:
    return _module(tag).greedy_successor(instance, state)


def extract_features(tag: str, instance, state: State):
    return _module(tag).extract_features(instance, state)


def n_features(tag: str) -> int:
    return _module(tag).N_FEATURES


def greedy_is_relaxed(tag: str) -> bool:
    """True when the domain's greedy policy may pick inapplicable transitions
    (TSPTW ignores deadlines), so rollouts apply effects without precondition
    checks."""
    return getattr(_module(tag), "GREEDY_RELAXED", False)


__all__ = [
    "DOMAIN_TAGS", "FIXTURES", "InvalidInstanceError", "UnsupportedDomainError",
    "build_model", "dual_bound", "extract_features", "fixture",
    "generate_instance", "greedy_is_relaxed", "greedy_successor",
    "instance_from_dict", "instance_to_dict", "knapsack", "load_instance",
    "n_features", "portfolio", "save_instance", "tsp", "tsptw",
]
