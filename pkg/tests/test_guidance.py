import math

import numpy as np
import pytest

from dpsearch import (
    BaseCase, ChildEval, Direction, DualBoundGuidance, GreedyRolloutGuidance,
    INF, MalformedPolicyError, Model, PI_FLOOR, PolicyGuidance, StateSchema,
    Transition, ValueNetGuidance, Variable, ZeroHGuidance, build_mdp, domains,
    f_dual, f_policy, h_greedy_rollout, perfect_evaluator, rollout_horizon,
    solve,
)
from dpsearch.search import SearchNode

S0_TSP3 = (0b110, 0)


def root_node(model) -> SearchNode:
    return SearchNode(state=model.target_state, g=0.0, depth=0, f=0.0, h=0.0,
                      pi=1.0, g_scaled=0.0, parent=None, via=None, seq=0)


def raw_children(model, node):
    out = []
    for t in model.applicable(node.state):
        child = model.apply_transition(node.state, t)
        g = node.g + model.transition_cost(node.state, t)
        out.append((t, child, g, model.dual_bound(child)))
    return out


class TestFValues:
    def test_f_dual(self):
        assert f_dual(3.0, 2.0) == 5.0
        assert f_dual(3.0, INF) == INF
        assert f_dual(3.0, -INF) == -INF

    def test_zero_h(self, tsp3):
        _, model = tsp3
        evals = ZeroHGuidance().evaluate_children(
            model, root_node(model), raw_children(model, root_node(model)))
        assert [e.h for e in evals] == [0.0, 0.0]
        assert evals[0].f == 1.0 and evals[1].f == 5.0

    def test_f_policy_min(self):
        assert f_policy(3.0, 1.0, 0.5, Direction.MIN) == 8.0

    def test_f_policy_max(self):
        assert f_policy(3.0, 1.0, 0.5, Direction.MAX) == 2.0

    def test_f_policy_identity_at_pi_one(self):
        assert f_policy(3.0, 1.0, 1.0, Direction.MIN) == 4.0
        assert f_policy(3.0, 1.0, 1.0, Direction.MAX) == 4.0

    def test_dual_guidance_children(self, tsp3):
        _, model = tsp3
        node = root_node(model)
        evals = DualBoundGuidance().evaluate_children(model, node,
                                                      raw_children(model, node))
        # both successors carry the combined bound eta = 3
        assert [e.f for e in evals] == [4.0, 8.0]
        assert [e.h for e in evals] == [3.0, 3.0]

    def test_childeval_defaults(self):
        ev = ChildEval(f=1.0, h=2.0)
        assert ev.pi == 1.0 and ev.g_scaled == 0.0


class TestGreedyRollout:
    def test_tsp3_rollout_is_greedy_tour(self, tsp3):
        inst, model = tsp3
        policy = lambda s: domains.greedy_successor("tsp", inst, s)
        assert h_greedy_rollout(model, S0_TSP3, policy) == 4.0

    def test_kp2_rollout_is_inadmissible_three(self, kp2):
        inst, model = kp2
        policy = lambda s: domains.greedy_successor("knapsack", inst, s)
        # ratio order takes item 0 first, after which item 1 no longer fits
        assert h_greedy_rollout(model, (0.0, 0), policy) == 3.0

    def test_base_state_returns_base_cost(self, tsp3):
        inst, model = tsp3
        policy = lambda s: domains.greedy_successor("tsp", inst, s)
        assert h_greedy_rollout(model, (0b000, 2), policy) == 1.0

    def test_rollout_matches_validated_solution(self):
        for seed in range(5):
            inst = domains.generate_instance("tsp", 7, seed)
            model = domains.build_model("tsp", inst)
            policy = lambda s: domains.greedy_successor("tsp", inst, s)
            state = model.target_state
            sequence = []
            while model.base_cost(state) is None:
                tid = policy(state)
                sequence.append(tid)
                state = model.apply_transition(state, tid)
            assert h_greedy_rollout(model, model.target_state, policy) == (
                model.solution_cost(sequence))

    def test_none_policy_yields_sentinel(self, tsp3):
        _, model = tsp3
        assert h_greedy_rollout(model, S0_TSP3, lambda s: None) == INF

    def test_inapplicable_choice_yields_sentinel_when_strict(self, tsp3):
        _, model = tsp3
        policy = lambda s: "visit(1)"  # inapplicable once customer 1 is visited
        assert h_greedy_rollout(model, (0b100, 1), policy) == INF

    def test_relaxed_rollout_ignores_preconditions(self, tsptw3):
        inst, model = tsptw3
        policy = lambda s: domains.greedy_successor("tsptw", inst, s)
        assert domains.greedy_is_relaxed("tsptw")
        assert h_greedy_rollout(model, model.target_state, policy, relaxed=True) == 4.0

    def test_runaway_policy_raises(self):
        schema = StateSchema((Variable("i", "element", 2),))
        model = Model(
            schema=schema, target_state=(0,),
            transitions=(
                Transition("fwd", lambda s: s[0] == 0, lambda s: (1,), lambda s: 1.0),
                Transition("back", lambda s: s[0] == 1, lambda s: (0,), lambda s: 1.0),
            ),
            base_cases=(BaseCase(lambda s: False, lambda s: 0.0),),
            direction=Direction.MIN)
        policy = lambda s: "fwd" if s[0] == 0 else "back"
        with pytest.raises(MalformedPolicyError):
            h_greedy_rollout(model, (0,), policy)

    def test_rollout_horizon_from_schema(self, tsp3):
        _, model = tsp3
        assert rollout_horizon(model) == 16 + 3 + 3

    def test_guidance_f_is_g_plus_rollout(self, tsp3):
        inst, model = tsp3
        policy = lambda s: domains.greedy_successor("tsp", inst, s)
        node = root_node(model)
        evals = GreedyRolloutGuidance(policy).evaluate_children(
            model, node, raw_children(model, node))
        # child via visit(1): g=1, rollout 2+1; via visit(2): g=5, rollout 5+5
        assert [e.f for e in evals] == [4.0, 15.0]


class TestValueNetGuidance:
    def test_max_example_and_masking(self, kp2, monkeypatch):
        inst, model = kp2
        mdp = build_mdp(model, "knapsack")
        guidance = ValueNetGuidance(mdp, params=None)
        import dpsearch.guidance as gmod

        monkeypatch.setattr(gmod, "forward",
                            lambda params, feats, mask=None: np.tile([0.5, 0.2], (len(feats), 1)))
        node = root_node(model)
        node.g_scaled = 0.3
        raw = [(model.resolve("take"), (2.0, 1), 3.0, model.dual_bound((2.0, 1)))]
        ev = guidance.evaluate_children(model, node, raw)[0]
        # both actions unmasked at (2.0, 1)? take no longer fits, so the max
        # runs over the unmasked subset: here only skip's 0.5 survives
        assert list(mdp.mask((2.0, 1))) == [True, False]
        assert ev.h == pytest.approx(0.5)
        assert ev.f == pytest.approx(0.3 + mdp.beta * 3.0 + 0.5)

    def test_masked_best_action_excluded_from_value(self, monkeypatch):
        class StubMdp:
            beta = 1e-4

            def mask(self, state):
                return np.array([False, True])

            def features(self, state):
                return np.zeros((2, 3))

        guidance = ValueNetGuidance(StubMdp(), params=None)
        import dpsearch.guidance as gmod

        monkeypatch.setattr(gmod, "forward",
                            lambda params, feats, mask=None: np.array([0.5, 0.2]))
        # Q = [0.5, 0.2] with action 0 masked: the value is 0.2, not 0.5
        assert guidance.value(("s",)) == pytest.approx(0.2)

    def test_value_sign_for_minimization(self, tsp3, monkeypatch):
        _, model = tsp3
        mdp = build_mdp(model, "tsp")
        guidance = ValueNetGuidance(mdp, params=None)
        import dpsearch.guidance as gmod

        monkeypatch.setattr(gmod, "forward",
                            lambda params, feats, mask=None: np.full((len(feats), 3), -0.25))
        node = root_node(model)
        raw = raw_children(model, node)[:1]  # via visit(1), non-base child
        ev = guidance.evaluate_children(model, node, raw)[0]
        # h = -V for minimization: the estimate -0.25 means 0.25 scaled cost to go
        assert ev.h == pytest.approx(0.25)
        assert ev.f == pytest.approx(mdp.beta * 1.0 + 0.25)

    def test_base_child_uses_exact_scaled_base_cost(self, tsp3):
        _, model = tsp3
        mdp = build_mdp(model, "tsp")
        from dpsearch.training import TrainConfig, make_network

        params = make_network("tsp", "q", TrainConfig(), mdp.n_actions, seed=0)
        guidance = ValueNetGuidance(mdp, params)
        parent = SearchNode(state=(0b100, 1), g=1.0, depth=1, f=0.0, h=0.0, pi=1.0,
                            g_scaled=0.001, parent=None, via=None, seq=0)
        t = model.resolve("visit(2)")
        child = model.apply_transition(parent.state, t)
        raw = [(t, child, 3.0, model.dual_bound(child))]
        ev = guidance.evaluate_children(model, parent, raw)[0]
        # base child: f = g_scaled' + beta*base = 0.001 + 0.002 + 0.001
        assert ev.f == pytest.approx(0.004)
        assert ev.g_scaled == pytest.approx(0.003)

    def test_dead_end_child_gets_pruning_sentinel(self):
        tag, inst = domains.fixture("fix-tsptw3")
        model = domains.build_model(tag, inst)
        mdp = build_mdp(model, "tsptw")
        from dpsearch.training import TrainConfig, make_network

        params = make_network("tsptw", "q", TrainConfig(), mdp.n_actions, seed=0)
        guidance = ValueNetGuidance(mdp, params)
        node = root_node(model)
        # the state after visit(2) can never reach customer 1 before b1=1
        t = model.resolve("visit(2)")
        raw = [(t, (0b010, 2, 5.0), 5.0, model.dual_bound((0b010, 2, 5.0)))]
        ev = guidance.evaluate_children(model, node, raw)[0]
        assert ev.f == INF

    def test_one_batched_forward_per_expansion(self, tsp3, monkeypatch):
        _, model = tsp3
        mdp = build_mdp(model, "tsp")
        guidance = ValueNetGuidance(mdp, params=None)
        calls = []
        import dpsearch.guidance as gmod

        def fake_forward(params, feats, mask=None):
            calls.append(np.asarray(feats).shape)
            return np.zeros((len(feats), 3))

        monkeypatch.setattr(gmod, "forward", fake_forward)
        node = root_node(model)
        guidance.evaluate_children(model, node, raw_children(model, node))
        assert len(calls) == 1
        assert calls[0][0] == 2  # both non-base children in one batch

    def test_beta_scales_g(self, kp2):
        inst, model = kp2
        mdp = build_mdp(model, "knapsack")
        from dpsearch.training import TrainConfig, make_network

        params = make_network("knapsack", "q", TrainConfig(), mdp.n_actions, seed=1)
        g1 = ValueNetGuidance(mdp, params)
        g2 = ValueNetGuidance(mdp, params, beta=2 * mdp.beta)
        node = root_node(model)
        raw = raw_children(model, node)
        e1 = g1.evaluate_children(model, node, raw)
        e2 = g2.evaluate_children(model, node, raw)
        for a, b in zip(e1, e2):
            assert b.g_scaled == pytest.approx(2 * a.g_scaled)


class TestPolicyGuidance:
    def test_constant_one_policy_reduces_to_dual(self, tsp3):
        _, model = tsp3
        guidance = PolicyGuidance(mdp=FakeActionMdp(model, "tsp"),
                                  policy_fn=lambda state, mask: np.ones(3))
        node = root_node(model)
        raw = raw_children(model, node)
        evals = guidance.evaluate_children(model, node, raw)
        dual = DualBoundGuidance().evaluate_children(model, node, raw)
        assert [e.f for e in evals] == [e.f for e in dual]
        assert all(e.pi == 1.0 for e in evals)

    def test_pi_accumulates_and_floors(self, tsp3):
        _, model = tsp3
        probs = np.array([0.0, 0.5, 0.25])
        guidance = PolicyGuidance(mdp=FakeActionMdp(model, "tsp"),
                                  policy_fn=lambda state, mask: probs)
        node = root_node(model)
        node.pi = 0.5
        evals = guidance.evaluate_children(model, node, raw_children(model, node))
        assert evals[0].pi == pytest.approx(0.25)    # 0.5 * 0.5 via visit(1)
        assert evals[1].pi == pytest.approx(0.125)   # 0.5 * 0.25 via visit(2)

    def test_zero_probability_floored(self, tsp3):
        _, model = tsp3
        guidance = PolicyGuidance(mdp=FakeActionMdp(model, "tsp"),
                                  policy_fn=lambda state, mask: np.zeros(3))
        node = root_node(model)
        evals = guidance.evaluate_children(model, node, raw_children(model, node))
        assert all(e.pi == PI_FLOOR for e in evals)
        assert all(math.isfinite(e.f) for e in evals)

    def test_min_divides_max_multiplies(self, tsp3, kp2):
        _, m_tsp = tsp3
        guidance = PolicyGuidance(mdp=FakeActionMdp(m_tsp, "tsp"),
                                  policy_fn=lambda state, mask: np.full(3, 0.5))
        node = root_node(m_tsp)
        evals = guidance.evaluate_children(m_tsp, node, raw_children(m_tsp, node))
        assert evals[0].f == pytest.approx((1.0 + 3.0) / 0.5)

        _, m_kp = kp2
        guidance = PolicyGuidance(mdp=FakeActionMdp(m_kp, "knapsack"),
                                  policy_fn=lambda state, mask: np.full(2, 0.5))
        node = root_node(m_kp)
        evals = guidance.evaluate_children(m_kp, node, raw_children(m_kp, node))
        for (t, _, g, eta), ev in zip(raw_children(m_kp, node), evals):
            assert ev.f == pytest.approx((g + eta) * 0.5)

    def test_one_distribution_call_per_expansion(self, tsp3):
        _, model = tsp3
        calls = []

        def policy_fn(state, mask):
            calls.append(state)
            return np.ones(3)

        guidance = PolicyGuidance(mdp=FakeActionMdp(model, "tsp"), policy_fn=policy_fn)
        node = root_node(model)
        guidance.evaluate_children(model, node, raw_children(model, node))
        assert calls == [node.state]

    def test_uniform_policy_preserves_sibling_order(self, tsp3):
        _, model = tsp3
        guidance = PolicyGuidance(mdp=FakeActionMdp(model, "tsp"),
                                  policy_fn=lambda state, mask: np.full(3, 1.0 / 3))
        node = root_node(model)
        raw = raw_children(model, node)
        evals = guidance.evaluate_children(model, node, raw)
        dual_order = np.argsort([g + eta for (_, _, g, eta) in raw])
        policy_order = np.argsort([e.f for e in evals])
        assert list(dual_order) == list(policy_order)

    def test_requires_params_or_policy(self, tsp3):
        _, model = tsp3
        with pytest.raises(ValueError):
            PolicyGuidance(mdp=FakeActionMdp(model, "tsp"))


class FakeActionMdp:
    """Just the action mapping, for injected-policy tests."""

    def __init__(self, model, tag):
        self._action_of = {t.tid: t.parameter for t in model.transitions}
        self.model = model

    def action_of(self, tid):
        return self._action_of[tid]

    def mask(self, state):
        out = np.zeros(max(self._action_of.values()) + 1, dtype=bool)
        for t in self.model.applicable(state):
            out[t.parameter] = True
        return out


class TestPerfectEvaluator:
    def test_children_f_equals_g_plus_value(self, tsp3):
        _, model = tsp3
        node = root_node(model)
        evals = perfect_evaluator(model).evaluate_children(
            model, node, raw_children(model, node))
        table = model.exact_value_table()
        for (t, state, g, _), ev in zip(raw_children(model, node), evals):
            assert ev.f == pytest.approx(g + table[state])


class TestGuidanceInSearch:
    def test_all_variants_prove_same_costs(self):
        """Smaller-scale version of the full acceptance sweep."""
        for name in ("fix-tsp3", "fix-tsptw3", "fix-kp2", "fix-pf2"):
            tag, inst = domains.fixture(name)
            model = domains.build_model(tag, inst)
            exact = model.exact_value()
            from dpsearch import make_evaluator

            for guidance_name in ("dual", "zero", "greedy", "dqn", "ppo"):
                evaluator = make_evaluator(guidance_name, model, tag, inst, seed=5)
                for algorithm in ("cabs", "acps", "apps"):
                    result = solve(algorithm, model, evaluator)
                    assert result.proved_optimal, (name, guidance_name, algorithm)
                    assert result.best.cost == pytest.approx(exact), (
                        name, guidance_name, algorithm)
