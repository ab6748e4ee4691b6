"""
Tests for configuration parsing and validation.
"""

import os
import tempfile
import unittest

from fairgne.config import (
    DEFAULT_METHODS,
    DualConfig,
    EnvConfig,
    ExperimentConfig,
    PenaltyConfig,
    TrainConfig,
    load_yaml,
)
from fairgne.errors import ConfigurationError

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


class TestCadencePresets(unittest.TestCase):

    def test_main_text(self):
        dual = DualConfig.from_dict({}, cadence="main-text")
        self.assertEqual((dual.eta_lambda, dual.update_unit, dual.update_period), (0.01, "step", 1))
        self.assertEqual(dual.g_source, "statewise")
        self.assertEqual(dual.lambda_max, 20.0)

    def test_appendix(self):
        dual = DualConfig.from_dict({}, cadence="appendix")
        self.assertEqual(dual.eta_lambda, 5e-4)
        self.assertEqual(dual.update_period, 5000)
        self.assertEqual(dual.g_source, "monte_carlo")

    def test_episodic(self):
        dual = DualConfig.from_dict({}, cadence="episodic")
        self.assertEqual((dual.update_unit, dual.g_source), ("episode", "episode"))

    def test_overrides_win(self):
        dual = DualConfig.from_dict({"eta_lambda": 0.2}, cadence="appendix")
        self.assertEqual(dual.eta_lambda, 0.2)
        self.assertEqual(dual.update_period, 5000)

    def test_unknown_preset(self):
        with self.assertRaises(ConfigurationError):
            DualConfig.from_dict({}, cadence="hourly")

    def test_inconsistent_sources(self):
        with self.assertRaises(ConfigurationError):
            DualConfig.from_dict({"update_unit": "episode"}, cadence="main-text")
        with self.assertRaises(ConfigurationError):
            DualConfig.from_dict({"update_unit": "step"}, cadence="episodic")


class TestPenaltySpecs(unittest.TestCase):

    def test_parse(self):
        self.assertEqual(PenaltyConfig.parse("none").mode, "none")
        gini = PenaltyConfig.parse("gini:50")
        self.assertEqual((gini.mode, gini.index, gini.lambda_fixed), ("fixed", "gini", 50.0))
        jfi = PenaltyConfig.parse("jfi:5@0.75")
        self.assertEqual((jfi.index, jfi.tau), ("jfi", 0.75))
        fair = PenaltyConfig.parse("fair_gne:0.65", cadence="episodic")
        self.assertEqual(fair.dual.tau, 0.65)
        self.assertEqual(fair.dual.update_unit, "episode")

    def test_labels(self):
        self.assertEqual(PenaltyConfig.parse("none").label, "No fairness")
        self.assertEqual(PenaltyConfig.parse("gini:10").label, "Gini index (lambda=10)")
        self.assertEqual(PenaltyConfig.parse("fair_gne:0.85").slug, "fair_gne_0.85")
        self.assertEqual(PenaltyConfig.parse("gini:0").slug, "gini_0")

    def test_malformed(self):
        for spec in ("gini:abc", "fair_gne:", "qmix:1", "gini:-1", "fair_gne:1.2"):
            with self.assertRaises(ConfigurationError, msg=spec):
                PenaltyConfig.parse(spec)


class TestTrainConfig(unittest.TestCase):

    def test_defaults(self):
        config = TrainConfig.from_dict({})
        self.assertEqual(config.epsilon_decay_fraction, 0.6)
        self.assertEqual(config.penalty.mode, "none")
        self.assertEqual(config.tau, config.eval_tau)

    def test_tau_follows_fair_penalty(self):
        config = TrainConfig.from_dict({"penalty": "fair_gne:0.55"})
        self.assertEqual(config.tau, 0.55)

    def test_validation(self):
        for bad in ({"gamma": 1.0}, {"episodes": 0}, {"backbone": "vdn"}, {"select_policy": "last"}, {"lr": 0.1}):
            with self.assertRaises(ConfigurationError, msg=str(bad)):
                TrainConfig.from_dict(bad)

    def test_with_seed(self):
        config = TrainConfig.from_dict({"seed": 1})
        self.assertEqual(config.with_seed(4).seed, 4)
        self.assertEqual(config.seed, 1)


class TestEnvConfig(unittest.TestCase):

    def test_chore_needs_two_agents(self):
        with self.assertRaises(ConfigurationError):
            EnvConfig.from_dict({"kind": "chore", "n": 3})
        self.assertEqual(EnvConfig.from_dict({"kind": "chore", "n": 2}).n_agents, 2)

    def test_custom_skills(self):
        with self.assertRaises(ConfigurationError):
            EnvConfig.from_dict({"skill_preset": "custom"})
        config = EnvConfig.from_dict({"skill_preset": "custom", "skills": [[True, True]] * 3})
        self.assertEqual(len(config.skills), 3)


class TestExperimentConfig(unittest.TestCase):
    """Grid construction from YAML mappings."""

    def test_default_file(self):
        config = ExperimentConfig.from_yaml(os.path.join(ROOT, "configs", "default.yaml"))
        self.assertEqual(len(config.methods), len(DEFAULT_METHODS))
        self.assertEqual(config.seeds, [0, 1, 2])
        self.assertEqual(config.cadence, "main-text")

    def test_dual_overrides_apply_to_every_fair_method(self):
        config = ExperimentConfig.from_dict(
            {"methods": ["none", "fair_gne:0.85", "fair_gne:0.65"], "dual": {"lambda_max": 5.0}}
        )
        fair = [m for m in config.methods if m.mode == "fair_gne"]
        self.assertTrue(all(m.dual.lambda_max == 5.0 for m in fair))
        self.assertEqual([m.dual.tau for m in fair], [0.85, 0.65])

    def test_duplicates_rejected(self):
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_dict({"methods": ["gini:10", "gini:10.0"]})

    def test_unknown_keys(self):
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_dict({"method": ["none"]})

    def test_round_trip(self):
        config = ExperimentConfig.from_dict({"methods": ["none", "fair_gne:0.75"], "seeds": [3]})
        data = config.to_dict()
        self.assertEqual(data["seeds"], [3])
        self.assertEqual(data["methods"][1]["dual"]["tau"], 0.75)


class TestLoadYaml(unittest.TestCase):

    def test_errors(self):
        with self.assertRaises(ConfigurationError):
            load_yaml("/nonexistent/config.yaml")
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "bad.yaml")
            with open(path, "w") as handle:
                handle.write("methods: [none\n")
            with self.assertRaises(ConfigurationError):
                load_yaml(path)
            with open(path, "w") as handle:
                handle.write("- just\n- a list\n")
            with self.assertRaises(ConfigurationError):
                load_yaml(path)
            with open(path, "w") as handle:
                handle.write("")
            self.assertEqual(load_yaml(path), {})


if __name__ == "__main__":
    unittest.main()
