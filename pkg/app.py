#!/usr/bin/env python3
"""
Fair-GNE - Command-line entry point

Trains the penalty learners over a method x seed grid, re-evaluates saved
policies, runs the finite-game oracle suite and re-renders result tables.

Exit codes: 0 success, 1 configuration error, 2 runtime failure,
3 oracle-suite failure.
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from agents import LEARNERS
from fairgne.config import EnvConfig, ExperimentConfig, load_yaml
from fairgne.errors import ConfigurationError, FairGNEError, SuiteParseError
from fairgne.metrics_stats import summarize, to_markdown
from fairgne.oracle_suite import run_oracle_suite
from fairgne.orchestrator import ExperimentOrchestrator, table_from_results
from fairgne.q_table import GreedyPolicy
from fairgne.rollout import evaluate_policy

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_SUITE = 3

logger = logging.getLogger("fairgne.app")


def setup_logging(level: str = "INFO"):
    """Configure logging for the application."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )


def initialize_orchestrator(workers: Optional[int] = None) -> ExperimentOrchestrator:
    """
    Initialize the orchestrator with every penalty learner registered.

    Returns:
        Configured ExperimentOrchestrator instance
    """
    orchestrator = ExperimentOrchestrator({"workers": workers} if workers else None)
    for mode, learner_cls in LEARNERS.items():
        orchestrator.register_learner(mode, learner_cls)
    return orchestrator


def build_experiment(args: argparse.Namespace, methods: Optional[List[str]] = None) -> ExperimentConfig:
    """Merge the YAML config (if any) with the command-line overrides."""
    data: Dict[str, Any] = load_yaml(args.config) if args.config else {}
    if methods is not None:
        data["methods"] = methods
    if args.seeds is not None:
        data["seeds"] = args.seeds
    if args.episodes is not None:
        data.setdefault("train", {})["episodes"] = args.episodes
    if args.out is not None:
        data["output_dir"] = args.out
    if args.cadence is not None:
        data["cadence"] = args.cadence
    if args.workers is not None:
        data["workers"] = args.workers
    dual = data.setdefault("dual", {})
    if args.eta_lambda is not None:
        dual["eta_lambda"] = args.eta_lambda
    if args.lambda_max is not None:
        dual["lambda_max"] = args.lambda_max
    return ExperimentConfig.from_dict(data)


def run_grid(args: argparse.Namespace, methods: Optional[List[str]] = None) -> int:
    config = build_experiment(args, methods)
    orchestrator = initialize_orchestrator(config.workers)
    artifact = orchestrator.run_experiment(config)
    print(to_markdown(artifact.table))
    if artifact.failed_cells:
        for cell in artifact.failed_cells:
            logger.error(f"cell {cell['method']}/{cell['seed']}: {cell['error']}")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    methods = None
    if args.tau is not None:
        methods = [args.baseline or "gini:0", f"fair_gne:{args.tau}"]
    return run_grid(args, methods)


def cmd_train(args: argparse.Namespace) -> int:
    if args.tau is None and args.baseline is None:
        raise ConfigurationError("train needs --tau (Fair-GNE) or --baseline")
    methods = []
    if args.baseline is not None:
        methods.append(args.baseline)
    if args.tau is not None:
        methods.append(f"fair_gne:{args.tau}")
    return run_grid(args, methods)


def cmd_eval(args: argparse.Namespace) -> int:
    policy = GreedyPolicy.load(args.policy)
    with open(args.policy, "r", encoding="utf-8") as handle:
        metadata = json.load(handle).get("metadata", {})
    env = EnvConfig.from_dict(metadata.get("env"))
    tau = args.tau if args.tau is not None else metadata.get("tau", 0.85)
    lam = float(metadata.get("lambda", 0.0))
    traces = evaluate_policy(policy, env, args.episodes, tau=tau, lam=lam)
    summary = summarize(traces, tau=tau, gamma=metadata.get("gamma", 0.99))
    print(json.dumps(summary.to_dict(), indent=2))
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    report = run_oracle_suite(args.suite)
    for case in report.cases:
        status = "PASS" if case.passed else "FAIL"
        print(f"{status}  {case.name}")
        for failure in case.failures:
            print(f"      {failure}")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as handle:
            json.dump(report.to_dict(), handle, indent=2)
    return EXIT_OK if report.passed else EXIT_SUITE


def cmd_table(args: argparse.Namespace) -> int:
    print(to_markdown(table_from_results(args.results)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Fair-GNE fairness-constrained multi-agent learning")
    parser.add_argument("--log-level", default="INFO", help="Logging level (DEBUG, INFO, WARNING, ...)")
    sub = parser.add_subparsers(dest="command", required=True)

    def grid_flags(p: argparse.ArgumentParser):
        p.add_argument("--config", type=str, help="Experiment YAML file")
        p.add_argument("--tau", type=float, help="Fair-GNE fairness threshold")
        p.add_argument("--baseline", type=str, help="Baseline method: none or gini:<lambda>")
        p.add_argument("--eta-lambda", dest="eta_lambda", type=float, help="Dual step size")
        p.add_argument("--lambda-max", dest="lambda_max", type=float, help="Multiplier upper bound")
        p.add_argument("--cadence", choices=["main-text", "appendix", "episodic"], help="Dual update cadence preset")
        p.add_argument("--seeds", type=int, nargs="+", help="Seeds to run")
        p.add_argument("--episodes", type=int, help="Training episodes per cell")
        p.add_argument("--out", type=str, help="Output directory")
        p.add_argument("--workers", type=int, help="Worker processes")

    grid_flags(sub.add_parser("run", help="Run the full method grid"))
    grid_flags(sub.add_parser("train", help="Train one method (and optionally a baseline) over seeds"))

    p_eval = sub.add_parser("eval", help="Re-evaluate a saved policy")
    p_eval.add_argument("--policy", required=True, help="policy_<method>_<seed>.json file")
    p_eval.add_argument("--episodes", type=int, default=50, help="Greedy evaluation episodes")
    p_eval.add_argument("--tau", type=float, help="Threshold for constraint metrics")

    p_oracle = sub.add_parser("oracle", help="Run the finite-game oracle suite")
    p_oracle.add_argument("--suite", default="configs/oracle_suite.yaml", help="Suite YAML file")
    p_oracle.add_argument("--report", help="Optional JSON report path")

    p_table = sub.add_parser("table", help="Re-render the comparison table")
    p_table.add_argument("--results", required=True, help="results.json file")
    return parser


COMMANDS = {"run": cmd_run, "train": cmd_train, "eval": cmd_eval, "oracle": cmd_oracle, "table": cmd_table}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the application."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, SuiteParseError) as exc:
        logger.error(f"configuration error: {exc}")
        return EXIT_CONFIG
    except (FairGNEError, OSError) as exc:
        logger.error(f"runtime failure: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
