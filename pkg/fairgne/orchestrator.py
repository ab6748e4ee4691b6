"""
Experiment Orchestrator - Coordinates the penalty learners over a method x seed grid.
"""

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Type

import pandas as pd

from .base_learner import BaseLearner
from .config import EnvConfig, ExperimentConfig, TrainConfig
from .constraint_dual import lambda_trace_frame
from .errors import ArtifactIOError, ConfigurationError
from .metrics_stats import EvalSummary, TestResult, aggregate, compare, comparison_table, summarize, to_markdown
from .rollout import evaluate_policy
from .trace import traces_to_frame

FINAL_EVAL_SEED_BASE = 50_000


@dataclass
class MethodResult:
    """Aggregated outcome of one method row."""

    slug: str
    label: str
    mode: str
    lambda_fixed: float
    summary: Optional[EvalSummary]
    per_seed: Dict[int, EvalSummary] = field(default_factory=dict)
    tests: Dict[str, TestResult] = field(default_factory=dict)
    errors: Dict[int, str] = field(default_factory=dict)

    def table_row(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "mode": self.mode,
            "lambda_fixed": self.lambda_fixed,
            "summary": self.summary,
            "tests": self.tests,
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slug": self.slug,
            "label": self.label,
            "mode": self.mode,
            "lambda_fixed": self.lambda_fixed,
            "summary": self.summary.to_dict() if self.summary else None,
            "per_seed": {str(s): v.to_dict() for s, v in self.per_seed.items()},
            "tests": {k: v.to_dict() for k, v in self.tests.items()},
            "errors": {str(s): e for s, e in self.errors.items()},
        }


@dataclass
class RunArtifact:
    """Everything a grid run produces; ``table`` is recomputable from ``methods``."""

    config: Dict[str, Any]
    methods: List[MethodResult]
    cells: List[Dict[str, Any]]
    created: str = ""

    @property
    def failed_cells(self) -> List[Dict[str, Any]]:
        return [c for c in self.cells if "error" in c]

    @property
    def table(self) -> pd.DataFrame:
        return comparison_table([m.table_row() for m in self.methods if m.summary is not None])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "created": self.created,
            "config": self.config,
            "methods": [m.to_dict() for m in self.methods],
            "cells": self.cells,
        }


def run_cell(
    learner_cls: Type[BaseLearner],
    env_config: EnvConfig,
    train_config: TrainConfig,
    output_dir: str,
    dump_traces: bool = True,
) -> Dict[str, Any]:
    """
    Train and evaluate one (method, seed) cell.

    Runs in a worker process; every failure is caught and returned as an
    ``error`` entry so sibling cells are unaffected.
    """
    slug, seed = train_config.penalty.slug, train_config.seed
    logger = logging.getLogger("fairgne.orchestrator")
    try:
        learner = learner_cls({"env": env_config, "train": train_config})
        report = learner.train()
        episodes = train_config.eval_episodes
        seeds = range(FINAL_EVAL_SEED_BASE, FINAL_EVAL_SEED_BASE + episodes)
        traces = evaluate_policy(
            report.policy, env_config, episodes, seeds=seeds, tau=train_config.tau, lam=report.policy_lambda
        )
        dual = train_config.penalty.dual
        summary = summarize(
            traces, tau=train_config.tau, epsilon_kkt=dual.epsilon_kkt if dual else 0.05, gamma=train_config.gamma
        )
        stem = f"{slug}_{seed}"
        if dump_traces:
            traces_to_frame(traces).to_csv(os.path.join(output_dir, f"episodes_{stem}.csv"), index=False)
            if dual is not None:
                lambda_trace_frame(report.lambda_history, dual.epsilon_kkt).to_csv(
                    os.path.join(output_dir, f"lambda_trace_{stem}.csv"), index=False
                )
        report.policy.save(
            os.path.join(output_dir, f"policy_{stem}.json"),
            metadata={
                "method": slug,
                "seed": seed,
                "lambda": report.policy_lambda,
                "tau": train_config.tau,
                "gamma": train_config.gamma,
                "env": env_config.to_dict(),
            },
        )
        return {"method": slug, "seed": seed, "summary": summary.to_dict(), "report": report.to_dict()}
    except Exception as exc:  # noqa: BLE001 - isolate every cell
        logger.error(f"cell {slug}/{seed} failed: {exc}")
        return {"method": slug, "seed": seed, "error": f"{type(exc).__name__}: {exc}"}


class ExperimentOrchestrator:
    """
    The Experiment Orchestrator is responsible for:
    1. Managing the learner classes, one per penalty mode
    2. Fanning a method x seed grid out over worker processes
    3. Aggregating per-seed evaluations and running the significance tests
    4. Writing the run artifacts
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        Initialize the Experiment Orchestrator.

        Args:
            config: Optional configuration parameters (``workers``)
        """
        self.logger = logging.getLogger("fairgne.orchestrator")
        self.config = config or {}
        self.learners: Dict[str, Type[BaseLearner]] = {}
        self._initialize_orchestrator()

    def _initialize_orchestrator(self):
        self.logger.info("Initializing Experiment Orchestrator")

    def register_learner(self, mode: str, learner_cls: Type[BaseLearner]):
        """
        Register the learner class that trains a penalty mode.

        Args:
            mode: Penalty mode (``none``, ``fixed`` or ``fair_gne``)
            learner_cls: BaseLearner subclass
        """
        self.learners[mode] = learner_cls
        self.logger.info(f"Registered learner: {mode} -> {learner_cls.__name__}")

    def _worker_limit(self, config: ExperimentConfig) -> int:
        return config.workers or self.config.get("workers") or os.cpu_count() or 1

    def _prepare_output(self, output_dir: str):
        try:
            os.makedirs(output_dir, exist_ok=True)
            probe = os.path.join(output_dir, ".write_probe")
            with open(probe, "w", encoding="utf-8") as handle:
                handle.write("")
            os.remove(probe)
        except OSError as exc:
            raise ArtifactIOError(f"output directory {output_dir} is not writable: {exc}") from exc

    def run_experiment(self, config: ExperimentConfig) -> RunArtifact:
        """
        Train, evaluate and compare every (method, seed) cell.

        Args:
            config: The validated experiment configuration

        Returns:
            The run artifact (also written to the output directory)
        """
        for method in config.methods:
            if method.mode not in self.learners:
                raise ConfigurationError(f"no learner registered for penalty mode {method.mode!r}")
        self._prepare_output(config.output_dir)

        jobs = []
        for method in config.methods:
            for seed in config.seeds:
                train = config.train.with_penalty(method).with_seed(seed)
                jobs.append((self.learners[method.mode], config.env, train, config.output_dir, config.dump_traces))
        workers = min(self._worker_limit(config), len(jobs))
        self.logger.info(f"Running {len(jobs)} cells on {workers} worker(s)")

        if workers == 1:
            cells = [run_cell(*job) for job in jobs]
        else:
            cells = []
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(run_cell, *job) for job in jobs]
                for job, future in zip(jobs, futures):
                    try:
                        cells.append(future.result())
                    except Exception as exc:  # noqa: BLE001 - a crashed worker only loses its own cell
                        train = job[2]
                        self.logger.error(f"cell {train.penalty.slug}/{train.seed} crashed: {exc}")
                        cells.append({"method": train.penalty.slug, "seed": train.seed, "error": str(exc)})

        methods = self._aggregate(config, cells)
        artifact = RunArtifact(
            config=config.to_dict(),
            methods=methods,
            cells=cells,
            created=datetime.now(timezone.utc).isoformat(),
        )
        self.write_artifact(artifact, config.output_dir)
        return artifact

    def _aggregate(self, config: ExperimentConfig, cells: List[Dict[str, Any]]) -> List[MethodResult]:
        results: List[MethodResult] = []
        for method in config.methods:
            own = [c for c in cells if c["method"] == method.slug]
            per_seed = {c["seed"]: EvalSummary.from_dict(c["summary"]) for c in own if "summary" in c}
            errors = {c["seed"]: c["error"] for c in own if "error" in c}
            results.append(
                MethodResult(
                    slug=method.slug,
                    label=method.label,
                    mode=method.mode,
                    lambda_fixed=method.lambda_fixed,
                    summary=aggregate(list(per_seed.values())) if per_seed else None,
                    per_seed=per_seed,
                    errors=errors,
                )
            )
        baselines = [r for r in results if r.mode != "fair_gne" and len(r.per_seed) >= 2]
        for result in results:
            if result.mode != "fair_gne" or len(result.per_seed) < 2:
                continue
            sample = [s.mean_jfi for s in result.per_seed.values()]
            for baseline in baselines:
                result.tests[baseline.label] = compare(
                    sample, [s.mean_jfi for s in baseline.per_seed.values()], alpha=config.alpha, m=len(baselines)
                )
        return results

    def write_artifact(self, artifact: RunArtifact, output_dir: str):
        """Write results.json, table.csv and table.md."""
        table = artifact.table
        try:
            with open(os.path.join(output_dir, "results.json"), "w", encoding="utf-8") as handle:
                json.dump(artifact.to_dict(), handle, indent=2, sort_keys=True)
            table.to_csv(os.path.join(output_dir, "table.csv"), index=False)
            with open(os.path.join(output_dir, "table.md"), "w", encoding="utf-8") as handle:
                handle.write(to_markdown(table))
        except OSError as exc:
            raise ArtifactIOError(f"cannot write artifacts to {output_dir}: {exc}") from exc
        self.logger.info(f"Wrote results for {len(artifact.methods)} methods to {output_dir}")

    def health_check(self) -> Dict[str, Any]:
        """
        Check the health of the orchestrator and its learners.

        Returns:
            A dictionary with health status information
        """
        return {
            "status": "healthy" if self.learners else "degraded",
            "learners": {mode: cls.__name__ for mode, cls in self.learners.items()},
            "workers": self.config.get("workers") or os.cpu_count() or 1,
        }


def table_from_results(path: str) -> pd.DataFrame:
    """Re-render the comparison table from a results.json file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, ValueError) as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc
    rows = []
    for method in data["methods"]:
        if method["summary"] is None:
            continue
        tests = {}
        for label, t in method["tests"].items():
            tests[label] = TestResult(**t)
        rows.append(
            {
                "label": method["label"],
                "mode": method["mode"],
                "lambda_fixed": method["lambda_fixed"],
                "summary": EvalSummary.from_dict(method["summary"]),
                "tests": tests,
            }
        )
    return comparison_table(rows)
