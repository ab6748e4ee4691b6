"""
Tests for the penalty learners, Q-tables and greedy rollouts.
"""

import math
import os
import tempfile
import unittest
from typing import List, Sequence

import numpy as np

from agents import LEARNERS, build_learner, train
from agents.fair_gne import FairGNELearner
from agents.fixed_penalty import FixedPenaltyLearner
from agents.unconstrained import UnconstrainedLearner
from fairgne.config import EnvConfig, PenaltyConfig, TrainConfig
from fairgne.environment import MultiAgentEnv, StepOutcome
from fairgne.errors import ConfigurationError, DomainError, NumericalError
from fairgne.fairness import discounted_violation
from fairgne.q_table import GreedyPolicy, QTable, resolve_backbone
from fairgne.rollout import estimate_constraint, greedy_rollout, make_env


def small_env(**overrides) -> EnvConfig:
    data = {"horizon": 20}
    data.update(overrides)
    return EnvConfig.from_dict(data)


def small_train(penalty="none", **overrides) -> TrainConfig:
    data = {"episodes": 40, "eval_every": 20, "eval_episodes": 2, "seed": 5, "penalty": penalty}
    data.update(overrides)
    return TrainConfig.from_dict(data)


def fair_gne(tau=0.85, **dual) -> PenaltyConfig:
    return PenaltyConfig.from_dict({"mode": "fair_gne", "tau": tau, "dual": dual}, cadence="main-text")


class OneStepEnv(MultiAgentEnv):
    """Single-step environment whose Jain value is scripted per seed."""

    n_agents = 2
    n_actions = 2
    horizon = 1

    def __init__(self, fairness_by_seed):
        self.fairness_by_seed = fairness_by_seed
        self.seed = 0

    def reset(self, seed: int = 0):
        self.seed = seed
        return 0

    def step(self, joint_action: Sequence[int]) -> StepOutcome:
        return StepOutcome(
            next_state=1,
            team_reward=0.0,
            workload_delta=[0, 0],
            done=True,
            success=False,
            fairness_value=self.fairness_by_seed[self.seed],
        )

    def state_key(self, state):
        return state

    def workload(self, state) -> List[int]:
        return [0, 0]


class TestQTable(unittest.TestCase):

    def test_backbone_resolution(self):
        self.assertEqual(resolve_backbone("auto", 2), "centralized_joint")
        self.assertEqual(resolve_backbone("auto", 3), "independent_per_agent")
        with self.assertRaises(ConfigurationError):
            resolve_backbone("qmix", 3)

    def test_unseen_state_falls_back_to_noop(self):
        table = QTable("independent_per_agent", 3, 8, noop_action=7)
        self.assertEqual(table.greedy(("anything",)), (7, 7, 7))

    def test_joint_update_and_argmax(self):
        table = QTable("centralized_joint", 2, 2)
        table.update("s", (1, 0), reward=1.0, next_key="s", done=True, alpha=0.5, gamma=0.9)
        self.assertEqual(table.greedy("s"), (1, 0))
        self.assertAlmostEqual(table.tables[0]["s"][2], 0.5)

    def test_ties_take_lowest_index(self):
        table = QTable("independent_per_agent", 2, 3)
        table.update("s", (2, 1), reward=0.0, next_key="s", done=True, alpha=0.5, gamma=0.9)
        self.assertEqual(table.greedy("s"), (0, 0))

    def test_bootstrap(self):
        table = QTable("independent_per_agent", 1, 2)
        table.tables[0]["t"][1] = 2.0
        table.update("s", (0,), reward=1.0, next_key="t", done=False, alpha=1.0, gamma=0.5)
        self.assertAlmostEqual(table.tables[0]["s"][0], 2.0)

    def test_non_finite_reward(self):
        table = QTable("centralized_joint", 2, 2)
        with self.assertRaises(NumericalError) as ctx:
            table.update("bad", (0, 0), reward=math.nan, next_key="bad", done=True, alpha=0.1, gamma=0.9)
        self.assertEqual(ctx.exception.state_key, "bad")

    def test_save_and_load(self):
        table = QTable("independent_per_agent", 2, 3, noop_action=2)
        key = ((0, -1), (1, 0), True, 3)
        table.update(key, (1, 2), reward=1.0, next_key=key, done=True, alpha=1.0, gamma=0.9)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "policy.json")
            table.policy().save(path, metadata={"seed": 1})
            loaded = GreedyPolicy.load(path)
        self.assertEqual(loaded.act(key), table.greedy(key))
        self.assertEqual(loaded.act("unseen"), (2, 2))


class TestRollouts(unittest.TestCase):

    def test_untrained_policy(self):
        policy = QTable("independent_per_agent", 3, 8, noop_action=7).policy()
        trace = greedy_rollout(policy, EnvConfig(), seed=0)
        self.assertFalse(trace.success)
        self.assertEqual(trace.total_reward, 0.0)
        self.assertLessEqual(len(trace), 50)
        self.assertEqual(trace.fallbacks, 3 * len(trace))
        self.assertEqual(set(trace.steps[0].actions), {"noop"})

    def test_trace_records_shaping(self):
        policy = QTable("independent_per_agent", 3, 8, noop_action=7).policy()
        trace = greedy_rollout(policy, EnvConfig(horizon=5), seed=0, tau=0.8, lam=2.0)
        step = trace.steps[0]
        self.assertAlmostEqual(step.g, 0.8 - step.jfi)
        self.assertAlmostEqual(step.shaped_reward, step.team_reward - 2.0 * step.g)
        frame = trace.to_frame()
        self.assertIn("lambda", frame.columns)
        self.assertIn("station_2", frame.columns)

    def test_estimate_constraint(self):
        env = OneStepEnv({0: 0.65, 1: 0.65, 2: 0.85, 3: 0.85})
        policy = QTable("centralized_joint", 2, 2).policy()
        self.assertAlmostEqual(estimate_constraint(policy, env, 4, 0.99, 0.85, seeds=[0, 1, 2, 3]), 0.1)
        single = greedy_rollout(policy, env, seed=0, tau=0.85)
        self.assertAlmostEqual(
            estimate_constraint(policy, env, 1, 0.99, 0.85, seeds=[0]), discounted_violation(single, 0.85, 0.99)
        )
        self.assertAlmostEqual(estimate_constraint(policy, env, 2, 0.99, 0.85, seeds=[2, 3]), 0.0)
        with self.assertRaises(DomainError):
            estimate_constraint(policy, env, 0, 0.99, 0.85)

    def test_make_env(self):
        self.assertEqual(make_env(EnvConfig(kind="chore", n_agents=2, horizon=10)).n_actions, 2)
        self.assertEqual(make_env(None).n_actions, 8)


class TestLearners(unittest.TestCase):
    """Training loop contracts shared by the three penalty learners."""

    def setUp(self):
        self.env = small_env()

    def test_registry(self):
        self.assertIs(LEARNERS["none"], UnconstrainedLearner)
        self.assertIs(LEARNERS["fixed"], FixedPenaltyLearner)
        self.assertIs(LEARNERS["fair_gne"], FairGNELearner)
        learner = build_learner(self.env, small_train("gini:10"))
        self.assertIsInstance(learner, FixedPenaltyLearner)
        self.assertEqual(learner.health_check()["status"], "healthy")
        self.assertTrue(len(learner.get_capabilities()) > 0)

    def test_unconstrained_has_no_multiplier(self):
        report = train(self.env, small_train("none"))
        self.assertEqual(report.lambda_history, [])
        self.assertEqual(report.final_lambda, 0.0)
        self.assertEqual(len(report.evaluations), 2)
        self.assertEqual(report.selected, "final")

    def test_fixed_penalty_reports_constant_lambda(self):
        report = train(self.env, small_train("gini:50"))
        self.assertTrue(all(e.lam == 50.0 for e in report.evaluations))
        self.assertTrue(all(e.summary.mean_lambda == 50.0 for e in report.evaluations))

    def test_determinism(self):
        first = train(self.env, small_train(fair_gne()))
        second = train(self.env, small_train(fair_gne()))
        self.assertEqual(first.to_dict(), second.to_dict())
        self.assertEqual(first.final_policy.table.to_dict(), second.final_policy.table.to_dict())

    def test_zero_penalty_modes_learn_identically(self):
        tables = []
        for penalty in ("none", "gini:0", fair_gne(eta_lambda=0.0, lambda_init=0.0)):
            learner = build_learner(self.env, small_train(penalty))
            learner.train()
            tables.append(learner.table.to_dict())
        self.assertEqual(tables[0], tables[1])
        self.assertEqual(tables[0], tables[2])

    def test_frozen_multiplier_matches_fixed_jain_penalty(self):
        fixed = build_learner(self.env, small_train("jfi:5@0.85"))
        frozen = build_learner(self.env, small_train(fair_gne(eta_lambda=0.0, lambda_init=5.0)))
        fixed_report = fixed.train()
        frozen_report = frozen.train()
        self.assertEqual(fixed.table.to_dict(), frozen.table.to_dict())
        self.assertEqual(
            [e.summary.to_dict() for e in fixed_report.evaluations],
            [e.summary.to_dict() for e in frozen_report.evaluations],
        )

    def test_fair_gne_moves_multiplier(self):
        learner = build_learner(self.env, small_train(fair_gne(tau=0.95)))
        report = learner.train()
        self.assertTrue(len(report.lambda_history) > 0)
        lams = [lam for _, lam, _ in report.lambda_history]
        self.assertTrue(all(0.0 <= lam <= 20.0 for lam in lams))
        self.assertEqual(learner.dual.iteration, learner.env_steps)

    def test_episodic_cadence(self):
        penalty = PenaltyConfig.from_dict({"mode": "fair_gne", "tau": 0.85}, cadence="episodic")
        learner = build_learner(self.env, small_train(penalty))
        learner.train()
        self.assertEqual(learner.dual.iteration, 40)
        self.assertEqual(len(learner.dual.history), 40)

    def test_multiplier_follows_violation_sign(self):
        penalty = PenaltyConfig.from_dict({"mode": "fair_gne", "tau": 0.85}, cadence="episodic")
        learner = build_learner(self.env, small_train(penalty))
        learner.train()
        history = learner.dual.history
        for (_, previous, _), (_, lam, g) in zip(history, history[1:]):
            if g > 0:
                self.assertGreaterEqual(lam, previous)
            elif g < 0:
                self.assertLessEqual(lam, previous)

    def test_monte_carlo_cadence(self):
        penalty = PenaltyConfig.from_dict(
            {"mode": "fair_gne", "tau": 0.85, "dual": {"update_period": 100, "rollouts": 2}}, cadence="appendix"
        )
        learner = build_learner(self.env, small_train(penalty, episodes=10, eval_every=10))
        learner.train()
        self.assertEqual(learner.dual.iteration, learner.env_steps // 100)

    def test_non_finite_shaped_reward(self):
        class Broken(UnconstrainedLearner):
            def shaped_reward(self, reward, workload, fairness):
                return math.inf

        learner = Broken({"env": self.env, "train": small_train("none")})
        with self.assertRaises(NumericalError) as ctx:
            learner.train()
        self.assertIsNotNone(ctx.exception.state_key)

    def test_fair_gne_requires_dual(self):
        with self.assertRaises(ConfigurationError):
            FairGNELearner({"env": self.env, "train": small_train("none")})

    def test_epsilon_schedule(self):
        learner = build_learner(self.env, small_train("none", episodes=100))
        self.assertEqual(learner.epsilon(0), 1.0)
        self.assertAlmostEqual(learner.epsilon(30), 1.0 - 0.95 * 0.5)
        self.assertAlmostEqual(learner.epsilon(60), 0.05)
        self.assertAlmostEqual(learner.epsilon(99), 0.05)

    def test_report_serializes(self):
        import json

        report = train(self.env, small_train(fair_gne()))
        data = json.loads(json.dumps(report.to_dict()))
        self.assertEqual(data["method"], "fair_gne_0.85")
        self.assertIn("mean_step_jfi", data["evaluations"][0])


    def test_checkpoint_multiplier_follows_selected_policy(self):
        report = train(self.env, small_train("none"))
        report.best_feasible_policy = report.final_policy.table.policy()
        report.best_feasible_episode = 20
        report.best_feasible_lambda = 0.3
        report.final_lambda = 1.7
        self.assertEqual(report.selected, "best_feasible")
        self.assertEqual(report.policy_lambda, 0.3)
        self.assertEqual(report.to_dict()["policy_lambda"], 0.3)
        report.select_policy = "final"
        self.assertEqual(report.policy_lambda, 1.7)


class TestChoreLearner(unittest.TestCase):

    def test_best_feasible_selection(self):
        env = EnvConfig(kind="chore", n_agents=2, horizon=10)
        report = train(env, small_train(fair_gne(tau=0.9), episodes=400, eval_every=20, eval_episodes=1))
        if report.best_feasible_policy is not None:
            best = [e for e in report.evaluations if e.episode == report.best_feasible_episode][0]
            self.assertTrue(best.feasible)
            self.assertIs(report.policy, report.best_feasible_policy)
            returns = [e.summary.mean_return for e in report.evaluations if e.feasible]
            self.assertEqual(best.summary.mean_return, max(returns))
        else:
            self.assertIs(report.policy, report.final_policy)
        self.assertIn(report.policy.act(()), [(0, 0), (0, 1), (1, 0), (1, 1)])
        self.assertTrue(np.isfinite(report.final_lambda))


if __name__ == "__main__":
    unittest.main()
