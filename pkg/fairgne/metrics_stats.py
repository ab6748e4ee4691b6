"""
Evaluation metrics and the statistical comparison protocol.

Episode-level metrics are aggregated per seed by ``summarize`` and across
seeds by ``aggregate``; methods are compared with Welch's t-test on per-seed
means, Cohen's d with the (n - 1)-weighted pooled standard deviation, and a
Bonferroni-adjusted significance level.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import betainc

from .constraint_dual import kkt_check
from .errors import DomainError
from .fairness import discounted_violation, jain_index

logger = logging.getLogger("fairgne.stats")

TABLE_COLUMNS = ["Method", "Success", "λ", "Workload JFI", "Constraint Sat.", "KKT Sat."]


@dataclass
class EvalSummary:
    """Greedy-evaluation metrics; ``std_*`` fields are across seeds once aggregated."""

    success_rate: float
    mean_jfi: float
    std_jfi: float
    mean_lambda: float
    std_lambda: float
    constraint_sat_rate: float
    kkt_sat_rate: float
    n_episodes: int
    n_seeds: int = 1
    mean_step_jfi: float = 1.0
    mean_return: float = 0.0
    mean_violation: float = 0.0
    std_success: float = 0.0
    std_constraint_sat: float = 0.0
    std_kkt_sat: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EvalSummary":
        return cls(**data)


@dataclass
class TestResult:
    t_statistic: float
    degrees_freedom: float
    p_value: float
    cohens_d: float = math.nan
    significant_bonferroni: bool = False
    alpha_adjusted: float = math.nan

    # keep pytest from collecting this as a test class
    __test__ = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def summarize(
    traces: Sequence,
    dual_history: Optional[Sequence[Tuple[int, float, float]]] = None,
    tau: float = 0.85,
    epsilon_kkt: float = 0.05,
    gamma: float = 0.99,
) -> EvalSummary:
    """
    Summarize greedy evaluation episodes.

    Args:
        traces: EpisodeTrace objects from greedy rollouts
        dual_history: Optional ``(iteration, lambda, g)`` records; when given,
            the lambda statistics come from it instead of the rollouts
        tau: Fairness threshold for constraint satisfaction
        epsilon_kkt: Relative KKT tolerance
        gamma: Discount of the per-episode violation

    Returns:
        The EvalSummary of the episodes
    """
    if len(traces) == 0:
        raise DomainError("cannot summarize an empty set of episodes")
    final_jfi = np.array([jain_index(t.final_workload) for t in traces])
    violations = np.array([discounted_violation(t, tau, gamma) for t in traces])
    kkt = [kkt_check(t.mean_lambda, v, epsilon_kkt).satisfied for t, v in zip(traces, violations)]
    if dual_history:
        lambdas = np.array([lam for _, lam, _ in dual_history])
    else:
        lambdas = np.array([t.mean_lambda for t in traces])
    return EvalSummary(
        success_rate=float(np.mean([t.success for t in traces])),
        mean_jfi=float(final_jfi.mean()),
        std_jfi=float(final_jfi.std()),
        mean_lambda=float(lambdas.mean()),
        std_lambda=float(lambdas.std()),
        constraint_sat_rate=float(np.mean(final_jfi >= tau)),
        kkt_sat_rate=float(np.mean(kkt)),
        n_episodes=len(traces),
        mean_step_jfi=float(np.mean([np.mean(t.jfi_series()) for t in traces])),
        mean_return=float(np.mean([t.total_reward for t in traces])),
        mean_violation=float(violations.mean()),
    )


def _seed_std(values: np.ndarray) -> float:
    return float(values.std(ddof=1)) if values.size > 1 else 0.0


def aggregate(summaries: Sequence[EvalSummary]) -> EvalSummary:
    """Across-seed mean and standard deviation of per-seed summaries."""
    if len(summaries) == 0:
        raise DomainError("cannot aggregate an empty set of summaries")

    def column(name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in summaries], dtype=float)

    return EvalSummary(
        success_rate=float(column("success_rate").mean()),
        mean_jfi=float(column("mean_jfi").mean()),
        std_jfi=_seed_std(column("mean_jfi")),
        mean_lambda=float(column("mean_lambda").mean()),
        std_lambda=_seed_std(column("mean_lambda")),
        constraint_sat_rate=float(column("constraint_sat_rate").mean()),
        kkt_sat_rate=float(column("kkt_sat_rate").mean()),
        n_episodes=int(sum(s.n_episodes for s in summaries)),
        n_seeds=int(sum(s.n_seeds for s in summaries)),
        mean_step_jfi=float(column("mean_step_jfi").mean()),
        mean_return=float(column("mean_return").mean()),
        mean_violation=float(column("mean_violation").mean()),
        std_success=_seed_std(column("success_rate")),
        std_constraint_sat=_seed_std(column("constraint_sat_rate")),
        std_kkt_sat=_seed_std(column("kkt_sat_rate")),
    )


def _sample(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise DomainError(f"sample {name} needs at least two observations")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"sample {name} contains non-finite values")
    return arr


def welch_ttest(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """
    Welch's unequal-variance t-test, two-sided.

    The p-value is the regularized incomplete beta I_x(df/2, 1/2) at
    x = df / (df + t^2). Two zero-variance samples give t = 0, p = 1 when
    their means agree and an infinite t with p = 0 otherwise.
    """
    a = _sample(a, "a")
    b = _sample(b, "b")
    na, nb = a.size, b.size
    va = a.var(ddof=1) / na
    vb = b.var(ddof=1) / nb
    se2 = va + vb
    diff = a.mean() - b.mean()
    if se2 == 0.0:
        if diff == 0.0:
            return TestResult(t_statistic=0.0, degrees_freedom=float(na + nb - 2), p_value=1.0)
        return TestResult(t_statistic=math.copysign(math.inf, diff), degrees_freedom=float(na + nb - 2), p_value=0.0)
    t = diff / math.sqrt(se2)
    df = se2 * se2 / (va * va / (na - 1) + vb * vb / (nb - 1))
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TestResult(t_statistic=float(t), degrees_freedom=float(df), p_value=min(max(p, 0.0), 1.0))


def cohens_d(a: Sequence[float], b: Sequence[float]) -> float:
    """(mean a - mean b) / pooled sd with (n_a - 1, n_b - 1) weights."""
    a = _sample(a, "a")
    b = _sample(b, "b")
    na, nb = a.size, b.size
    pooled = math.sqrt(((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2))
    diff = float(a.mean() - b.mean())
    if pooled == 0.0:
        if diff == 0.0:
            return 0.0
        logger.warning("pooled standard deviation is zero; reporting an infinite effect size")
        return math.copysign(math.inf, diff)
    return diff / pooled


def bonferroni(p_values: Sequence[float], alpha: float = 0.05, m: Optional[int] = None) -> List[bool]:
    """Flag p_i <= alpha / m."""
    p_values = list(p_values)
    m = len(p_values) if m is None else m
    if not p_values or m < len(p_values):
        raise DomainError(f"need 1 <= len(p_values) <= m, got {len(p_values)} and m={m}")
    if any(not 0.0 <= p <= 1.0 for p in p_values):
        raise DomainError(f"p-values must lie in [0, 1], got {p_values}")
    threshold = alpha / m
    return [p <= threshold for p in p_values]


def compare(a: Sequence[float], b: Sequence[float], alpha: float = 0.05, m: int = 1) -> TestResult:
    """Welch test plus effect size and Bonferroni flag for one pair of samples."""
    result = welch_ttest(a, b)
    result.cohens_d = cohens_d(a, b)
    result.alpha_adjusted = alpha / m
    result.significant_bonferroni = bonferroni([result.p_value], alpha, m)[0]
    return result


def _pm(mean: float, std: float) -> str:
    return f"{mean:.2f} ± {std:.2f}"


def _significance(tests: Dict[str, TestResult]) -> str:
    if not tests:
        return ""
    worst = max(tests.values(), key=lambda r: r.p_value)
    marker = "‡" if worst.p_value < 0.01 else ("†" if worst.significant_bonferroni else "")
    return f"p={worst.p_value:.4f}{marker}"


def comparison_table(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """
    Table with one row per method.

    Each row mapping carries ``label``, ``mode``, ``summary`` (aggregated
    EvalSummary), optional ``lambda_fixed`` and optional ``tests`` (baseline
    label -> TestResult). A significance column, holding the largest p-value
    against the baselines, is only added when some row has tests.
    """
    records = []
    with_tests = any(row.get("tests") for row in rows)
    for row in rows:
        s: EvalSummary = row["summary"]
        if row.get("mode") == "fair_gne":
            lam = _pm(s.mean_lambda, s.std_lambda)
        else:
            lam = f"{row.get('lambda_fixed', 0.0):g} (fixed)"
        record = {
            "Method": row["label"],
            "Success": _pm(s.success_rate, s.std_success),
            "λ": lam,
            "Workload JFI": _pm(s.mean_jfi, s.std_jfi),
            "Constraint Sat.": f"{100 * s.constraint_sat_rate:.0f}%",
            "KKT Sat.": f"{100 * s.kkt_sat_rate:.0f}%" if row.get("mode") == "fair_gne" else "-",
        }
        if with_tests:
            record["Significance"] = _significance(row.get("tests") or {})
        records.append(record)
    columns = TABLE_COLUMNS + (["Significance"] if with_tests else [])
    return pd.DataFrame(records, columns=columns)


def to_markdown(frame: pd.DataFrame) -> str:
    """Render a frame as a GitHub-style pipe table."""
    header = "| " + " | ".join(str(c) for c in frame.columns) + " |"
    rule = "|" + "|".join("---" for _ in frame.columns) + "|"
    body = ["| " + " | ".join(str(v) for v in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join([header, rule] + body) + "\n"
