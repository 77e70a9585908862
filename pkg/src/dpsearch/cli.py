"""Command line front end.

Subcommands: generate, solve, train, sample, report. Instance arguments take
either a bundled fixture name (fix-tsp3, fix-tsptw3, fix-kp2, fix-pf2) or a
path to a JSON instance file. Output files land in --out / the current
directory, or under $DPSEARCH_OUT_DIR when that is set.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import domains
from .experiment import (
    ExperimentConfig, export_results, make_evaluator, run_search_experiment,
    sample_solve,
)
from .nn import load_params, save_params
from .search import SOLVERS, SearchLimits, solve
from .training import default_config, train_dqn, train_ppo


class CliError(SystemExit):
    def __init__(self, message: str):
        print(f"error: {message}", file=sys.stderr)
        super().__init__(2)


def _out_path(name: str, explicit: str | None) -> Path:
    if explicit is not None:
        return Path(explicit)
    base = os.environ.get("DPSEARCH_OUT_DIR", ".")
    return Path(base) / name


def _resolve_instance(source: str, domain: str | None):
    """Fixture name or JSON path -> (domain_tag, instance)."""
    if source in domains.FIXTURES:
        tag, instance = domains.fixture(source)
    elif Path(source).exists():
        tag, instance = domains.load_instance(source)
    else:
        raise CliError(f"{source!r} is neither a fixture name {sorted(domains.FIXTURES)} "
                       "nor an existing instance file")
    if domain is not None and domain != tag:
        raise CliError(f"instance {source!r} is for domain {tag!r}, not {domain!r}")
    return tag, instance


def _load_weights(path: str, domain: str, kind: str):
    params = load_params(path)
    if params.domain != domain:
        raise CliError(f"weights in {path} were trained for domain {params.domain!r}, "
                       f"expected {domain!r}")
    if params.kind != kind:
        raise CliError(f"weights in {path} hold a {params.kind!r} network, expected {kind!r}")
    return params


def _evaluator_from_args(args, tag, model, instance):
    params = None
    if args.guidance in ("dqn", "ppo"):
        if getattr(args, "weights", None):
            kind = "q" if args.guidance == "dqn" else "actor"
            params = _load_weights(args.weights, tag, kind)
    return make_evaluator(args.guidance, model, tag, instance, params=params,
                          seed=getattr(args, "net_seed", 0))


def cmd_generate(args) -> int:
    instance = domains.generate_instance(args.domain, args.n, args.seed)
    path = _out_path(f"{args.domain}-n{args.n}-s{args.seed}.json", args.out)
    domains.save_instance(args.domain, instance, path)
    print(f"wrote {path}")
    return 0


def _instance_from_args(args):
    """--instance wins; otherwise generate from --domain/--n/--seed."""
    if args.instance is not None:
        return _resolve_instance(args.instance, args.domain)
    if args.domain is None:
        raise CliError("need --instance or --domain with --n")
    return args.domain, domains.generate_instance(args.domain, args.n, args.seed)


def cmd_solve(args) -> int:
    tag, instance = _instance_from_args(args)
    model = domains.build_model(tag, instance)
    evaluator = _evaluator_from_args(args, tag, model, instance)
    limits = SearchLimits(max_expansions=args.max_expansions, max_time=args.max_time)
    result = solve(args.algo, model, evaluator, limits=limits)
    if result.best is None:
        print("solution: none")
    else:
        print(f"solution: cost={result.best.cost} sequence={list(result.best.sequence)}")
    print(f"proved_optimal: {result.proved_optimal}")
    print(f"expansions: {result.expansions} generated: {result.generated}")
    for expansions, cost in result.anytime_trace:
        print(f"trace: {expansions} {cost}")
    return 0


def cmd_train(args) -> int:
    if args.instance is not None:
        tag, instance = _resolve_instance(args.instance, args.domain)
        generator = lambda episode: instance
        size = args.n
    else:
        tag = args.domain
        from .training import sampled_instances

        generator = sampled_instances(tag, args.n, args.seed)
        size = args.n
    config = default_config(tag, args.algo, size, seed=args.seed, episodes=args.episodes)
    trainer = train_dqn if args.algo == "dqn" else train_ppo
    result = trainer(tag, generator, config)
    path = _out_path(f"{tag}-{args.algo}-n{size}.weights.json", args.out)
    save_params(result.params, path)
    tail = result.episode_returns[-10:]
    print(f"wrote {path}")
    print(f"episodes: {len(result.episode_returns)} "
          f"last_returns: {[round(r, 6) for r in tail]}")
    return 0


def cmd_sample(args) -> int:
    tag, instance = _instance_from_args(args)
    model = domains.build_model(tag, instance)
    evaluator = _evaluator_from_args(args, tag, model, instance)
    result = sample_solve(model, evaluator, count=args.count,
                          temperature=args.temperature, seed=args.seed)
    print(f"samples: {result.count} feasible: {result.feasible}")
    print(f"best: {result.best}")
    return 0


def cmd_report(args) -> int:
    config = ExperimentConfig(
        domain=args.domain, n=args.n, instances=args.instances, seed=args.seed,
        algorithms=tuple(args.algorithms.split(",")),
        guidances=tuple(args.guidances.split(",")),
        max_expansions=args.max_expansions, max_time=args.max_time)
    records = run_search_experiment(config)
    csv_path = _out_path(f"report-{args.domain}-n{args.n}.csv", args.csv)
    json_path = _out_path(f"report-{args.domain}-n{args.n}.json", args.json)
    export_results(records, csv_path=csv_path, json_path=json_path)
    print(f"wrote {csv_path} and {json_path}")
    for r in records:
        print(f"{r.instance_id} {r.algorithm}/{r.guidance}: cost={r.cost} "
              f"gap={None if r.gap is None else round(r.gap, 3)} "
              f"proved={r.proved_optimal} expansions={r.expansions}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpsearch",
                                     description="Anytime search over dynamic programming models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random instance file")
    p.add_argument("--domain", required=True, choices=domains.DOMAIN_TAGS)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("solve", help="run one search on one instance")
    p.add_argument("--instance", default=None, help="fixture name or instance file")
    p.add_argument("--domain", default=None, choices=domains.DOMAIN_TAGS)
    p.add_argument("--n", type=int, default=6, help="size when generating an instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algo", "--algorithm", default="cabs", choices=sorted(SOLVERS))
    p.add_argument("--guidance", default="dual",
                   choices=("dual", "zero", "greedy", "dqn", "ppo"))
    p.add_argument("--weights", default=None, help="weight file for dqn/ppo guidance")
    p.add_argument("--net-seed", type=int, default=0)
    p.add_argument("--max-expansions", type=int, default=None)
    p.add_argument("--max-time", type=float, default=None)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("train", help="train guidance weights")
    p.add_argument("--domain", required=True, choices=domains.DOMAIN_TAGS)
    p.add_argument("--algo", required=True, choices=("dqn", "ppo"))
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--episodes", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instance", default=None,
                   help="train on one fixed instance (fixture name or file)")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sample", help="randomized rollouts from the target state")
    p.add_argument("--instance", default=None)
    p.add_argument("--domain", default=None, choices=domains.DOMAIN_TAGS)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--guidance", default="dual",
                   choices=("dual", "zero", "greedy", "dqn", "ppo"))
    p.add_argument("--weights", default=None)
    p.add_argument("--net-seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1280)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("report", help="run a solver/guidance grid and export CSV/JSON")
    p.add_argument("--domain", required=True, choices=domains.DOMAIN_TAGS)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--instances", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algorithms", default="cabs,acps,apps")
    p.add_argument("--guidances", default="dual,zero,greedy")
    p.add_argument("--max-expansions", type=int, default=20000)
    p.add_argument("--max-time", type=float, default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--json", default=None)
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
