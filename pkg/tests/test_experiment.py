import csv
import dataclasses

import numpy as np
import pytest

from dpsearch import domains
from dpsearch.experiment import (
    ExperimentConfig, RunRecord, SampleResult, compute_gap, export_results,
    instance_seed, load_results, make_evaluator, run_search_experiment,
    sample_solve,
)
from dpsearch.guidance import DualBoundGuidance, GreedyRolloutGuidance
from dpsearch.nn import save_params
from dpsearch.training import TrainConfig, make_network


def fixture_model(name):
    tag, inst = domains.fixture(name)
    return tag, inst, domains.build_model(tag, inst)


class TestComputeGap:
    CASES = [
        (9.0, 8.0, 12.5),
        (8.0, 8.0, 0.0),
        (None, 8.0, 100.0),
        (10.0, 8.0, 25.0),
        (4.0, 8.0, 50.0),
        (8.0, 10.0, 20.0),
        (-9.0, -8.0, 12.5),
        (-8.0, -8.0, 0.0),
        (0.0, 8.0, 100.0),
        (16.0, 8.0, 100.0),
    ]

    @pytest.mark.parametrize("cost,best,expected", CASES)
    def test_table(self, cost, best, expected):
        assert compute_gap(cost, best) == pytest.approx(expected, abs=1e-12)

    def test_zero_best_rejected(self):
        with pytest.raises(ValueError):
            compute_gap(5.0, 0.0)

    def test_none_cost_scores_hundred(self):
        assert compute_gap(None, 3.0) == 100.0


class TestConfigValidation:
    def test_accepts_known_fields(self):
        cfg = ExperimentConfig(domain="tsp", algorithms=("cabs", "acps"),
                               guidances=("dual", "zero"))
        assert cfg.instances == 3

    @pytest.mark.parametrize("kwargs", [
        dict(domain="maze"),
        dict(domain="tsp", instances=0),
        dict(domain="tsp", n=0),
        dict(domain="tsp", algorithms=("dfs",)),
        dict(domain="tsp", guidances=("oracle",)),
        dict(domain="tsp", sample_count=0),
        dict(domain="tsp", sample_temperature=0.0),
        dict(domain="tsp", weight_paths=(("dual", "w.json"),)),
    ])
    def test_rejects_bad_fields(self, kwargs):
        with pytest.raises(ValueError):
            ExperimentConfig(**kwargs)


class TestMakeEvaluator:
    def test_all_five_names(self):
        tag, inst, model = fixture_model("fix-tsp3")
        for name in ("dual", "zero", "greedy", "dqn", "ppo"):
            ev = make_evaluator(name, model, tag, inst)
            assert ev.name == name

    def test_unknown_name(self):
        tag, inst, model = fixture_model("fix-tsp3")
        with pytest.raises(ValueError):
            make_evaluator("astar", model, tag, inst)

    def test_greedy_uses_relaxed_rollouts_only_for_windows(self):
        tag, inst, model = fixture_model("fix-tsptw3")
        ev = make_evaluator("greedy", model, tag, inst)
        assert isinstance(ev, GreedyRolloutGuidance)
        assert ev.relaxed
        tag, inst, model = fixture_model("fix-tsp3")
        assert not make_evaluator("greedy", model, tag, inst).relaxed


class TestRunSearchExperiment:
    CFG = dict(domain="tsp", n=5, instances=2, seed=3,
               algorithms=("cabs", "acps"), guidances=("dual", "zero"))

    def test_grid_shape_and_proved_costs(self):
        records = run_search_experiment(ExperimentConfig(**self.CFG))
        assert len(records) == 2 * 2 * 2
        by_instance = {}
        for r in records:
            assert r.kind == "run"
            assert r.proved_optimal
            assert r.gap == 0.0
            by_instance.setdefault(r.instance_id, set()).add(r.cost)
        assert set(len(v) for v in by_instance.values()) == {1}

    def test_deterministic_modulo_wall_time(self):
        def strip(records):
            return [dataclasses.replace(r, wall_time=0.0) for r in records]

        a = run_search_experiment(ExperimentConfig(**self.CFG))
        b = run_search_experiment(ExperimentConfig(**self.CFG))
        assert strip(a) == strip(b)

    def test_instance_ids_and_seeds(self):
        records = run_search_experiment(ExperimentConfig(
            domain="knapsack", n=5, instances=2, seed=7))
        ids = {r.instance_id for r in records}
        assert ids == {"knapsack-n5-i0", "knapsack-n5-i1"}
        seeds = {r.instance_id: r.seed for r in records}
        assert seeds["knapsack-n5-i0"] == instance_seed(7, 0)
        assert seeds["knapsack-n5-i1"] == instance_seed(7, 1)

    def test_zero_expansion_budget_scores_hundred(self):
        records = run_search_experiment(ExperimentConfig(
            domain="tsp", n=5, instances=1, seed=0, max_expansions=0))
        assert len(records) == 1
        r = records[0]
        assert r.cost is None and not r.proved_optimal
        assert r.trace == ()
        assert r.gap == 100.0

    def test_reference_costs_override_batch_best(self):
        cfg = ExperimentConfig(domain="tsp", n=5, instances=1, seed=3)
        plain = run_search_experiment(cfg)
        best = plain[0].cost
        rigged = run_search_experiment(
            cfg, reference_costs={plain[0].instance_id: best / 2.0})
        assert rigged[0].gap == pytest.approx(100.0)

    def test_learned_guidance_accepts_weights(self, tmp_path):
        params = make_network("tsp", "q", TrainConfig(), 5, seed=1)
        path = tmp_path / "w.json"
        save_params(params, path)
        records = run_search_experiment(ExperimentConfig(
            domain="tsp", n=5, instances=1, seed=0, guidances=("dqn",),
            weight_paths=(("dqn", str(path)),)))
        assert records[0].proved_optimal

    def test_weight_domain_mismatch_rejected(self, tmp_path):
        params = make_network("knapsack", "q", TrainConfig(), 2, seed=1)
        path = tmp_path / "w.json"
        save_params(params, path)
        with pytest.raises(ValueError, match="domain"):
            run_search_experiment(ExperimentConfig(
                domain="tsp", n=5, instances=1, guidances=("dqn",),
                weight_paths=(("dqn", str(path)),)))


class TestSampleSolve:
    def test_cold_greedy_sampling_finds_the_short_tour(self):
        tag, inst, model = fixture_model("fix-tsp3")
        ev = make_evaluator("greedy", model, tag, inst)
        result = sample_solve(model, ev, count=40, temperature=1e-6, seed=0)
        assert result.feasible == 40
        assert set(result.costs) == {4.0}
        assert result.best == 4.0

    def test_hot_sampling_mixes_both_tours(self):
        tag, inst, model = fixture_model("fix-tsp3")
        ev = make_evaluator("greedy", model, tag, inst)
        result = sample_solve(model, ev, count=60, temperature=100.0, seed=0)
        assert set(result.costs) == {4.0, 15.0}
        assert result.best == 4.0

    def test_windows_fixture_all_rollouts_feasible(self):
        tag, inst, model = fixture_model("fix-tsptw3")
        result = sample_solve(model, DualBoundGuidance(), count=30, seed=1)
        # the doomed first move is filtered by the state constraint
        assert result.feasible == 30
        assert result.best == 4.0

    def test_maximization_prefers_high_h(self):
        tag, inst, model = fixture_model("fix-kp2")
        ev = make_evaluator("greedy", model, tag, inst)
        result = sample_solve(model, ev, count=50, temperature=1e-6, seed=2)
        assert result.best == 4.0

    def test_policy_weighted_sampling(self):
        tag, inst, model = fixture_model("fix-tsp3")
        ev = make_evaluator("ppo", model, tag, inst, seed=5)
        result = sample_solve(model, ev, count=50, temperature=2.0, seed=3)
        assert result.feasible == 50
        assert result.best == 4.0
        assert set(result.costs) <= {4.0, 15.0}

    def test_validation(self):
        tag, inst, model = fixture_model("fix-tsp3")
        with pytest.raises(ValueError):
            sample_solve(model, DualBoundGuidance(), count=0)
        with pytest.raises(ValueError):
            sample_solve(model, DualBoundGuidance(), temperature=0.0)

    def test_determinism(self):
        tag, inst, model = fixture_model("fix-tsp3")
        a = sample_solve(model, DualBoundGuidance(), count=25, seed=9)
        b = sample_solve(model, DualBoundGuidance(), count=25, seed=9)
        assert a == b

    def test_step_cap_limits_depth(self):
        tag, inst, model = fixture_model("fix-tsp3")
        result = sample_solve(model, DualBoundGuidance(), count=10, step_cap=1)
        assert result.feasible == 0
        assert result.best is None


class TestExport:
    def make_records(self):
        return run_search_experiment(ExperimentConfig(
            domain="knapsack", n=5, instances=2, seed=1,
            algorithms=("cabs",), guidances=("dual", "greedy")))

    def test_csv_layout(self, tmp_path):
        records = self.make_records()
        path = tmp_path / "out.csv"
        export_results(records, csv_path=path)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["schema_version", "kind", "instance", "method",
                                 "expansions", "cost", "gap", "proved_optimal",
                                 "wall_ms"]
        runs = [r for r in rows if r["kind"] == "run"]
        traces = [r for r in rows if r["kind"] == "trace"]
        assert len(runs) == len(records)
        assert len(traces) == sum(len(r.trace) for r in records)
        assert {r["schema_version"] for r in rows} == {"1"}
        assert {r["method"] for r in runs} == {"cabs/dual", "cabs/greedy"}
        for row, record in zip(runs, records):
            assert float(row["cost"]) == record.cost
            assert float(row["gap"]) == record.gap
            assert int(row["expansions"]) == record.expansions
            assert float(row["wall_ms"]) == pytest.approx(record.wall_time * 1000.0)
            assert row["proved_optimal"] == str(int(record.proved_optimal))

    def test_trace_rows_carry_the_anytime_curve(self, tmp_path):
        records = self.make_records()
        path = tmp_path / "out.csv"
        export_results(records, csv_path=path)
        with open(path) as fh:
            rows = [r for r in csv.DictReader(fh) if r["kind"] == "trace"]
        want = [(f"{r.algorithm}/{r.guidance}", e, c)
                for r in records for e, c in r.trace]
        got = [(r["method"], int(r["expansions"]), float(r["cost"])) for r in rows]
        assert got == want

    def test_json_round_trip(self, tmp_path):
        records = self.make_records()
        path = tmp_path / "out.json"
        export_results(records, json_path=path)
        loaded = load_results(path)
        assert loaded == records

    def test_load_rejects_other_versions(self, tmp_path):
        import json

        path = tmp_path / "out.json"
        path.write_text(json.dumps({"schema_version": 99, "records": []}))
        with pytest.raises(ValueError):
            load_results(path)

    def test_missing_cost_serializes_empty(self, tmp_path):
        record = RunRecord(kind="run", domain="tsp", instance_id="tsp-n5-i0",
                           n=5, seed=0, algorithm="cabs", guidance="dual",
                           cost=None, proved_optimal=False, expansions=0,
                           generated=0, wall_time=0.0, gap=100.0, trace=())
        csv_path = tmp_path / "o.csv"
        json_path = tmp_path / "o.json"
        export_results([record], csv_path=csv_path, json_path=json_path)
        with open(csv_path) as fh:
            row = next(csv.DictReader(fh))
        assert row["cost"] == ""
        assert load_results(json_path)[0].cost is None
