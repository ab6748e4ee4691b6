"""
Tests for evaluation summaries and the statistical comparison protocol.
"""

import math
import unittest

import numpy as np
from scipy import stats

from fairgne.errors import DomainError
from fairgne.metrics_stats import (
    EvalSummary,
    aggregate,
    bonferroni,
    cohens_d,
    compare,
    comparison_table,
    summarize,
    to_markdown,
    welch_ttest,
)
from fairgne.trace import EpisodeTrace, StepRecord

SPREAD = 0.0623


def make_trace(workloads, success=False, lam=0.0, tau=0.85):
    """Trace whose steps carry the given running workloads."""
    trace = EpisodeTrace(n_agents=len(workloads[0]), success=success)
    for t, w in enumerate(workloads):
        total = float(sum(w))
        jfi = 1.0 if total == 0 else total * total / (len(w) * sum(x * x for x in w))
        trace.append(
            StepRecord(
                t=t, stations=[], actions=[], team_reward=1.0, shaped_reward=1.0,
                jfi=jfi, g=tau - jfi, lam=lam, workload=list(w), potential=int(total),
            )
        )
    return trace


class TestWelch(unittest.TestCase):
    """Welch's t-test against scipy's reference implementation."""

    def test_matches_scipy(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            a = rng.normal(0.8, 0.1, size=int(rng.integers(3, 10)))
            b = rng.normal(0.6, 0.3, size=int(rng.integers(3, 10)))
            ours = welch_ttest(a, b)
            ref = stats.ttest_ind(a, b, equal_var=False)
            self.assertAlmostEqual(ours.t_statistic, ref.statistic, places=9)
            self.assertAlmostEqual(ours.p_value, ref.pvalue, places=9)

    def test_three_seed_example(self):
        a = [0.89 - SPREAD, 0.89, 0.89 + SPREAD]
        b = [0.33 - SPREAD, 0.33, 0.33 + SPREAD]
        result = welch_ttest(a, b)
        ref = stats.ttest_ind(a, b, equal_var=False)
        self.assertAlmostEqual(result.degrees_freedom, 4.0)
        self.assertAlmostEqual(result.p_value, ref.pvalue, places=9)
        self.assertLess(result.p_value, 0.01)

    def test_symmetry(self):
        a, b = [1.0, 1.2, 0.9], [0.5, 0.7, 0.4, 0.6]
        ab, ba = welch_ttest(a, b), welch_ttest(b, a)
        self.assertAlmostEqual(ab.t_statistic, -ba.t_statistic)
        self.assertAlmostEqual(ab.p_value, ba.p_value)

    def test_p_shrinks_with_separation(self):
        base = np.array([0.0, 0.1, -0.1, 0.05])
        p_values = [welch_ttest(base + shift, base).p_value for shift in (0.05, 0.1, 0.2, 0.4)]
        self.assertEqual(p_values, sorted(p_values, reverse=True))

    def test_zero_variance(self):
        same = welch_ttest([0.5, 0.5, 0.5], [0.5, 0.5])
        self.assertEqual(same.t_statistic, 0.0)
        self.assertEqual(same.p_value, 1.0)
        apart = welch_ttest([0.9, 0.9], [0.1, 0.1])
        self.assertEqual(apart.t_statistic, math.inf)
        self.assertEqual(apart.p_value, 0.0)

    def test_input_validation(self):
        with self.assertRaises(DomainError):
            welch_ttest([1.0], [1.0, 2.0])
        with self.assertRaises(DomainError):
            welch_ttest([1.0, math.nan], [1.0, 2.0])


class TestEffectSize(unittest.TestCase):

    def test_three_seed_example(self):
        a = [0.89 - SPREAD, 0.89, 0.89 + SPREAD]
        b = [0.33 - SPREAD, 0.33, 0.33 + SPREAD]
        self.assertAlmostEqual(cohens_d(a, b), 0.56 / SPREAD, places=6)
        self.assertAlmostEqual(cohens_d(a, b), 8.99, delta=0.01)

    def test_one_sd_shift(self):
        b = np.array([1.0, 2.0, 3.0, 4.0])
        sd = b.std(ddof=1)
        self.assertAlmostEqual(cohens_d(b + sd, b), 1.0)
        self.assertAlmostEqual(cohens_d(b, b + sd), -1.0)

    def test_degenerate(self):
        self.assertEqual(cohens_d([1.0, 1.0], [1.0, 1.0]), 0.0)
        with self.assertLogs("fairgne.stats", level="WARNING"):
            self.assertEqual(cohens_d([2.0, 2.0], [1.0, 1.0]), math.inf)


class TestBonferroni(unittest.TestCase):

    def test_threshold(self):
        self.assertEqual(bonferroni([0.01, 0.02, 0.0166], alpha=0.05), [True, False, True])
        self.assertEqual(bonferroni([0.01], alpha=0.05, m=6), [False])
        self.assertEqual(bonferroni([0.008], alpha=0.05, m=6), [True])

    def test_validation(self):
        with self.assertRaises(DomainError):
            bonferroni([])
        with self.assertRaises(DomainError):
            bonferroni([0.1, 0.2], m=1)
        with self.assertRaises(DomainError):
            bonferroni([1.5])

    def test_compare(self):
        a = [0.89 - SPREAD, 0.89, 0.89 + SPREAD]
        b = [0.33 - SPREAD, 0.33, 0.33 + SPREAD]
        result = compare(a, b, alpha=0.05, m=3)
        self.assertAlmostEqual(result.alpha_adjusted, 0.05 / 3)
        self.assertTrue(result.significant_bonferroni)
        self.assertGreater(result.cohens_d, 8.0)


class TestSummaries(unittest.TestCase):
    """Per-seed summaries and their aggregation across seeds."""

    def test_success_rate(self):
        traces = [make_trace([[1, 1, 1]], success=i < 43) for i in range(50)]
        summary = summarize(traces)
        self.assertAlmostEqual(summary.success_rate, 0.86)
        self.assertEqual(summary.n_episodes, 50)
        self.assertEqual(summary.constraint_sat_rate, 1.0)

    def test_concentrated_workload(self):
        summary = summarize([make_trace([[1, 0, 0], [4, 0, 0]])], tau=0.85)
        self.assertAlmostEqual(summary.mean_jfi, 1.0 / 3.0)
        self.assertEqual(summary.constraint_sat_rate, 0.0)
        self.assertGreater(summary.mean_violation, 0.0)
        self.assertEqual(summary.kkt_sat_rate, 0.0)

    def test_lambda_from_history(self):
        traces = [make_trace([[1, 1]], lam=3.0)]
        self.assertEqual(summarize(traces).mean_lambda, 3.0)
        history = [(1, 1.0, 0.1), (2, 2.0, 0.1), (3, 3.0, 0.1)]
        self.assertEqual(summarize(traces, dual_history=history).mean_lambda, 2.0)

    def test_empty(self):
        with self.assertRaises(DomainError):
            summarize([])
        with self.assertRaises(DomainError):
            aggregate([])

    def test_aggregate(self):
        seeds = [
            summarize([make_trace([[1, 1, 1]], success=True)]),
            summarize([make_trace([[2, 1, 1]], success=False)]),
            summarize([make_trace([[1, 1, 1]], success=True)]),
        ]
        total = aggregate(seeds)
        jfis = np.array([1.0, 16.0 / 18.0, 1.0])
        self.assertEqual(total.n_seeds, 3)
        self.assertAlmostEqual(total.mean_jfi, jfis.mean())
        self.assertAlmostEqual(total.std_jfi, jfis.std(ddof=1))
        self.assertAlmostEqual(total.success_rate, 2.0 / 3.0)
        self.assertEqual(EvalSummary.from_dict(total.to_dict()), total)

    def test_single_seed_has_zero_spread(self):
        total = aggregate([summarize([make_trace([[1, 2]])])])
        self.assertEqual(total.std_jfi, 0.0)


class TestTables(unittest.TestCase):

    def setUp(self):
        self.fair = aggregate([summarize([make_trace([[1, 1, 1]], success=True, lam=0.4)])])
        self.base = aggregate([summarize([make_trace([[3, 0, 0]], success=True)])])

    def test_without_tests(self):
        frame = comparison_table(
            [{"label": "Gini index (lambda=10)", "mode": "fixed", "lambda_fixed": 10.0, "summary": self.base}]
        )
        self.assertNotIn("Significance", frame.columns)
        self.assertEqual(frame.loc[0, "λ"], "10 (fixed)")
        self.assertEqual(frame.loc[0, "KKT Sat."], "-")

    def test_with_tests(self):
        a = [0.89 - SPREAD, 0.89, 0.89 + SPREAD]
        b = [0.33 - SPREAD, 0.33, 0.33 + SPREAD]
        tests = {"No fairness": compare(a, b, m=2), "Gini index (lambda=10)": compare(a, b[::-1], m=2)}
        frame = comparison_table(
            [
                {"label": "No fairness", "mode": "none", "summary": self.base},
                {"label": "Fair-GNE (tau=0.85)", "mode": "fair_gne", "summary": self.fair, "tests": tests},
            ]
        )
        self.assertEqual(list(frame.columns)[-1], "Significance")
        self.assertEqual(frame.loc[0, "Significance"], "")
        self.assertTrue(frame.loc[1, "Significance"].endswith("‡"))
        self.assertEqual(frame.loc[1, "λ"], "0.40 ± 0.00")
        self.assertEqual(frame.loc[1, "Constraint Sat."], "100%")

    def test_markdown(self):
        frame = comparison_table([{"label": "No fairness", "mode": "none", "summary": self.base}])
        text = to_markdown(frame)
        lines = text.strip().splitlines()
        self.assertEqual(len(lines), 3)
        self.assertTrue(lines[0].startswith("| Method | Success"))
        self.assertIn("No fairness", lines[2])


if __name__ == "__main__":
    unittest.main()
