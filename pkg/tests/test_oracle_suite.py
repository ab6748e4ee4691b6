"""
Tests for the oracle validation suite runner.
"""

import os
import tempfile
import textwrap
import unittest

from fairgne.errors import SuiteParseError
from fairgne.oracle_suite import parse_suite, run_case, run_oracle_suite

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_SUITE = os.path.join(ROOT, "configs", "oracle_suite.yaml")


class SuiteFileMixin:

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def write_suite(self, text: str) -> str:
        path = os.path.join(self.tmp.name, "suite.yaml")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(textwrap.dedent(text))
        return path


class TestDefaultSuite(unittest.TestCase):

    def test_all_cases_pass(self):
        report = run_oracle_suite(DEFAULT_SUITE)
        failures = {c.name: c.failures for c in report.cases if not c.passed}
        self.assertTrue(report.passed, failures)
        self.assertEqual(
            [c.name for c in report.cases],
            ["chore", "infeasible_tau", "unconstrained_optimum_feasible", "rescue_micro", "random_games"],
        )

    def test_chore_certificate(self):
        chore = parse_suite(DEFAULT_SUITE)[0]
        result = run_case(chore)
        certificate = result.certificates[0]
        self.assertEqual(certificate["status"], "cycle")
        self.assertEqual(certificate["profile"], ["work", "work"])
        self.assertEqual(result.to_dict()["line"], chore["_line"])


class TestParseErrors(SuiteFileMixin, unittest.TestCase):
    """Malformed suites fail with the line of the offending case."""

    def test_unknown_game(self):
        path = self.write_suite(
            """\
            cases:
              - name: ok
                game: chore
              - name: bad
                game: poker
            """
        )
        with self.assertRaises(SuiteParseError) as ctx:
            parse_suite(path)
        self.assertEqual(ctx.exception.line, 4)
        self.assertIn("line 4", str(ctx.exception))

    def test_unknown_key(self):
        path = self.write_suite(
            """\
            cases:
              - name: typo
                game: chore
                etaa: 0.1
            """
        )
        with self.assertRaises(SuiteParseError) as ctx:
            parse_suite(path)
        self.assertEqual(ctx.exception.line, 2)

    def test_table_without_entries(self):
        path = self.write_suite(
            """\
            cases:
              - name: empty
                game: table
                policies: [[a], [a]]
            """
        )
        with self.assertRaises(SuiteParseError):
            parse_suite(path)

    def test_invalid_yaml(self):
        path = self.write_suite("cases:\n  - name: [unclosed\n")
        with self.assertRaises(SuiteParseError) as ctx:
            parse_suite(path)
        self.assertIsNotNone(ctx.exception.line)

    def test_missing_cases(self):
        path = self.write_suite("games: []\n")
        with self.assertRaises(SuiteParseError):
            parse_suite(path)

    def test_missing_file(self):
        with self.assertRaises(SuiteParseError):
            parse_suite(os.path.join(self.tmp.name, "absent.yaml"))


class TestExpectations(SuiteFileMixin, unittest.TestCase):

    def test_failed_expectation_is_reported(self):
        path = self.write_suite(
            """\
            cases:
              - name: wrong_profile
                game: chore
                tau: 0.9
                eta: 0.01
                expect:
                  profile: [rest, rest]
            """
        )
        report = run_oracle_suite(path)
        self.assertFalse(report.passed)
        self.assertIn("profile", report.cases[0].failures[0])

    def test_missing_table_entry_is_a_case_failure(self):
        path = self.write_suite(
            """\
            cases:
              - name: partial
                game: table
                tau: 0.8
                policies: [[a, b], [a]]
                table:
                  - {profile: [0, 0], R: 1.0, w: [1, 1]}
            """
        )
        report = run_oracle_suite(path)
        self.assertFalse(report.passed)
        self.assertEqual(report.to_dict()["cases"][0]["line"], 2)

    def test_capped_multiplier_case(self):
        path = self.write_suite(
            """\
            cases:
              - name: steep
                game: table
                tau: 0.97
                eta: 1.0
                policies: [[a, b], [a, b]]
                table:
                  - {profile: [0, 0], R: 1.0, w: [3, 2]}
                  - {profile: [0, 1], R: 0.0, w: [1, 1]}
                  - {profile: [1, 0], R: 0.0, w: [1, 1]}
                  - {profile: [1, 1], R: 0.0, w: [1, 1]}
                expect:
                  status_in: [capped]
                  infeasible: false
                  profile: [a, b]
            """
        )
        report = run_oracle_suite(path)
        self.assertTrue(report.passed, report.cases[0].failures)


if __name__ == "__main__":
    unittest.main()
