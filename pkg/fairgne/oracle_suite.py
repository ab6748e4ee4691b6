"""
Oracle validation suite.

A suite file is YAML with a ``cases`` list. Each case declares a finite game
(``chore``, ``table``, ``scripted`` or ``random``), the ascent settings and
optional expectations; every case is also checked against the structural
properties of exact dual ascent (dual convexity, weak duality, feasibility of
the returned profile, penalized optimality and the equilibrium check).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from .chore_game import chore_game
from .config import EnvConfig
from .errors import ConfigurationError, FairGNEError, SuiteParseError
from .gne_oracle import (
    FiniteGame,
    ProfileTable,
    SaddleCertificate,
    dual_function,
    enumerate_profiles,
    exact_dual_ascent,
    random_finite_game,
    scripted_sim_evaluator,
    table_evaluator,
)

logger = logging.getLogger("fairgne.oracle")

GAME_KINDS = ("chore", "table", "scripted", "random")
CASE_KEYS = (
    "name", "game", "tau", "eta", "max_iter", "lambda0", "lambda_max", "epsilon",
    "policies", "table", "env", "scripts", "gamma", "count", "seed", "n_agents", "n_policies", "expect",
)
EXPECT_KEYS = ("status_in", "switching_lambda", "lambda_star", "profile", "infeasible", "smgne", "max_iterations")
SLACK = 1e-9


@dataclass
class CaseResult:
    name: str
    line: Optional[int]
    failures: List[str] = field(default_factory=list)
    certificates: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "line": self.line,
            "passed": self.passed,
            "failures": self.failures,
            "certificates": self.certificates,
        }


@dataclass
class SuiteReport:
    path: str
    cases: List[CaseResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    def to_dict(self) -> Dict[str, Any]:
        return {"path": self.path, "passed": self.passed, "cases": [c.to_dict() for c in self.cases]}


def parse_suite(path: str) -> List[Dict[str, Any]]:
    """
    Parse a suite file into case mappings, each annotated with ``_line``.

    Raises:
        SuiteParseError: The file is not YAML or a case is malformed
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise SuiteParseError(f"cannot read suite {path}: {exc}") from exc
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SuiteParseError(f"invalid YAML: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None) from exc
    if not isinstance(data, dict) or not isinstance(data.get("cases"), list):
        raise SuiteParseError("suite must be a mapping with a 'cases' list", 1)

    case_nodes = next(v for k, v in root.value if k.value == "cases").value
    cases = []
    for node, case in zip(case_nodes, data["cases"]):
        line = node.start_mark.line + 1
        if not isinstance(case, dict):
            raise SuiteParseError("each case must be a mapping", line)
        unknown = sorted(set(case) - set(CASE_KEYS))
        if unknown:
            raise SuiteParseError(f"unknown case keys: {', '.join(unknown)}", line)
        if case.get("game") not in GAME_KINDS:
            raise SuiteParseError(f"case game must be one of {GAME_KINDS}, got {case.get('game')!r}", line)
        unknown = sorted(set(case.get("expect") or {}) - set(EXPECT_KEYS))
        if unknown:
            raise SuiteParseError(f"unknown expectation keys: {', '.join(unknown)}", line)
        if case["game"] == "table" and not (case.get("policies") and case.get("table")):
            raise SuiteParseError("table games need 'policies' and 'table'", line)
        if case["game"] == "scripted" and not case.get("scripts"):
            raise SuiteParseError("scripted games need 'scripts'", line)
        cases.append({**case, "_line": line})
    return cases


def build_game(case: Dict[str, Any]) -> FiniteGame:
    """Finite game described by one (non-random) case."""
    kind = case["game"]
    tau = float(case.get("tau", 0.9))
    name = case.get("name", kind)
    if kind == "chore":
        game = chore_game(tau=tau)
        game.name = name
        return game
    if kind == "table":
        entries = {tuple(row["profile"]): (row["R"], row["w"]) for row in case["table"]}
        return FiniteGame(policy_sets=case["policies"], evaluator=table_evaluator(entries), tau=tau, name=name)
    env = EnvConfig.from_dict(case.get("env"))
    scripts = case["scripts"]
    policy_sets = [[f"plan{k}" for k in range(len(agent_plans))] for agent_plans in scripts]
    return FiniteGame(
        policy_sets=policy_sets,
        evaluator=scripted_sim_evaluator(env, scripts, gamma=float(case.get("gamma", 0.99))),
        tau=tau,
        name=name,
        evaluation="discounted",
    )


def check_certificate(table: ProfileTable, certificate: SaddleCertificate, log) -> List[str]:
    """Structural checks every certificate must pass; returns failure messages."""
    failures = []
    feasible = table.feasible
    if feasible.any():
        best_feasible_r = float(table.returns[feasible].max())
        if certificate.pi_star is None:
            failures.append("a feasible profile exists but none was returned")
            return failures
        if table.g[certificate.pi_star] > 0.0:
            failures.append("returned profile violates the constraint")
        lam = certificate.lambda_star
        objective = table.returns - lam * table.g
        # a capped multiplier cannot price out the infeasible optimum
        if certificate.status != "capped" and objective[certificate.pi_star] < objective.max() - SLACK:
            failures.append(f"returned profile is not penalized-optimal at lambda={lam:.6f}")
        for it in log:
            if dual_function(table, it.lam) < best_feasible_r - SLACK:
                failures.append(f"weak duality fails at lambda={it.lam:.6f}")
                break
        if certificate.kkt.satisfied and not certificate.deviation_checked:
            failures.append(f"KKT point fails the equilibrium check: {certificate.witness}")
    elif certificate.pi_star is not None:
        failures.append("no feasible profile exists but one was returned")

    upper = max([it.lam for it in log] + [1.0])
    grid = np.linspace(0.0, upper, 21)
    values = [dual_function(table, lam) for lam in grid]
    for i in range(len(grid) - 2):
        mid = dual_function(table, 0.5 * (grid[i] + grid[i + 2]))
        if mid > 0.5 * (values[i] + values[i + 2]) + SLACK:
            failures.append("dual function is not convex on the lambda grid")
            break
    return failures


def _check_expectations(table: ProfileTable, certificate: SaddleCertificate, expect: Dict[str, Any]) -> List[str]:
    failures = []
    if "status_in" in expect and certificate.status not in expect["status_in"]:
        failures.append(f"status {certificate.status} not in {expect['status_in']}")
    if "infeasible" in expect and certificate.infeasible != bool(expect["infeasible"]):
        failures.append(f"infeasible={certificate.infeasible}, expected {expect['infeasible']}")
    if "switching_lambda" in expect:
        lo, hi = expect["switching_lambda"]
        value = certificate.switching_lambda if certificate.switching_lambda is not None else certificate.lambda_star
        if not lo <= value <= hi:
            failures.append(f"switching lambda {value:.4f} outside [{lo}, {hi}]")
    if "lambda_star" in expect and abs(certificate.lambda_star - float(expect["lambda_star"])) > 1e-9:
        failures.append(f"lambda* = {certificate.lambda_star}, expected {expect['lambda_star']}")
    if "profile" in expect and list(certificate.profile_label or []) != list(expect["profile"]):
        failures.append(f"profile {certificate.profile_label}, expected {expect['profile']}")
    if "smgne" in expect and certificate.deviation_checked != bool(expect["smgne"]):
        failures.append(f"equilibrium check {certificate.deviation_checked}, expected {expect['smgne']}")
    if "max_iterations" in expect and certificate.iterations > int(expect["max_iterations"]):
        failures.append(f"{certificate.iterations} iterations, expected at most {expect['max_iterations']}")
    return failures


def _ascent_kwargs(case: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "eta": float(case.get("eta", 0.01)),
        "max_iter": int(case.get("max_iter", 10000)),
        "lambda0": float(case.get("lambda0", 0.0)),
        "lambda_max": float(case.get("lambda_max", 20.0)),
        "epsilon": float(case.get("epsilon", 0.05)),
    }


def run_case(case: Dict[str, Any]) -> CaseResult:
    name = case.get("name", case["game"])
    result = CaseResult(name=name, line=case.get("_line"))
    kwargs = _ascent_kwargs(case)
    if case["game"] == "random":
        rng = np.random.default_rng(int(case.get("seed", 0)))
        games = []
        while len(games) < int(case.get("count", 100)):
            game = random_finite_game(rng, case.get("n_agents"), case.get("n_policies"), case.get("tau"))
            table = enumerate_profiles(game)
            if table.feasible.any():
                games.append(table)
    else:
        games = [enumerate_profiles(build_game(case))]

    for idx, table in enumerate(games):
        certificate, log = exact_dual_ascent(table, **kwargs)
        prefix = f"game {idx}: " if len(games) > 1 else ""
        failures = check_certificate(table, certificate, log)
        failures += _check_expectations(table, certificate, case.get("expect") or {})
        result.failures.extend(prefix + f for f in failures)
        if len(games) == 1:
            result.certificates.append(certificate.to_dict())
    status = "PASS" if result.passed else "FAIL"
    logger.info(f"oracle case {name}: {status} ({len(games)} game(s))")
    for failure in result.failures:
        logger.warning(f"oracle case {name}: {failure}")
    return result


def run_oracle_suite(path: str) -> SuiteReport:
    """
    Run every case of a suite file.

    Args:
        path: Suite YAML file

    Returns:
        The pass/fail report; parse problems raise SuiteParseError
    """
    cases = parse_suite(path)
    results = []
    for case in cases:
        try:
            results.append(run_case(case))
        except (FairGNEError, KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise SuiteParseError(str(exc), case.get("_line")) from exc
            results.append(CaseResult(name=case.get("name", case["game"]), line=case.get("_line"), failures=[str(exc)]))
    report = SuiteReport(path=path, cases=results)
    logger.info(f"oracle suite {path}: {sum(c.passed for c in results)}/{len(results)} cases passed")
    return report
