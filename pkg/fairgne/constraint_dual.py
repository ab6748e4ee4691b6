"""
The adaptive Lagrange multiplier: shaped rewards, projected dual ascent and
complementary-slackness (KKT) accounting.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Sequence, Tuple, Union

import pandas as pd

from .config import DualConfig
from .errors import DomainError, NumericalError

logger = logging.getLogger("fairgne.dual")


@dataclass
class DualState:
    """
    Multiplier lambda with its projection box [0, lambda_max] and cadence.

    ``history`` holds ``(iteration, lambda, g_estimate)`` for every
    ``history_stride``-th update.
    """

    lam: float = 0.0
    lambda_max: float = 20.0
    eta_lambda: float = 0.01
    tau: float = 0.85
    update_period: int = 1
    update_unit: str = "step"
    g_source: str = "statewise"
    rollouts: int = 1
    clamp_penalty: bool = False
    history_stride: int = 1
    iteration: int = 0
    history: List[Tuple[int, float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.lambda_max <= 0:
            raise DomainError("lambda_max must be positive")
        if not 0.0 <= self.lam <= self.lambda_max:
            raise DomainError(f"lambda {self.lam} outside [0, {self.lambda_max}]")
        if self.eta_lambda < 0:
            raise DomainError("eta_lambda must be non-negative")
        if not 0.0 < self.tau < 1.0:
            raise DomainError(f"tau must lie in (0, 1), got {self.tau}")

    @classmethod
    def from_config(cls, config: DualConfig, horizon: int = 1) -> "DualState":
        stride = config.history_stride
        if stride is None:
            # per-step cadences would otherwise log millions of points
            stride = horizon if config.update_unit == "step" and config.update_period == 1 else 1
        return cls(
            lam=config.lambda_init,
            lambda_max=config.lambda_max,
            eta_lambda=config.eta_lambda,
            tau=config.tau,
            update_period=config.update_period,
            update_unit=config.update_unit,
            g_source=config.g_source,
            rollouts=config.rollouts,
            clamp_penalty=config.clamp_penalty,
            history_stride=max(1, int(stride)),
        )

    @property
    def at_lower_bound(self) -> bool:
        return self.lam <= 0.0

    @property
    def at_upper_bound(self) -> bool:
        return self.lam >= self.lambda_max


@dataclass
class KKTRecord:
    """Complementary-slackness check of one (lambda, g) pair."""

    lam: float
    g: float
    residual: float
    feasible: bool
    epsilon: float

    @property
    def satisfied(self) -> bool:
        return self.feasible and self.residual <= self.epsilon * (1.0 + self.lam)

    def to_dict(self):
        return {
            "lambda": self.lam,
            "g": self.g,
            "residual": self.residual,
            "feasible": self.feasible,
            "epsilon": self.epsilon,
            "satisfied": self.satisfied,
        }


def shaped_reward(r: float, dual: DualState, fairness_value: float) -> float:
    """
    r - lambda * (tau - F). Slack (F > tau) yields a bonus unless the
    penalty is clamped at zero.
    """
    penalty = dual.tau - fairness_value
    if dual.clamp_penalty:
        penalty = max(0.0, penalty)
    return r - dual.lam * penalty


def _project(value: float, upper: float) -> float:
    return min(max(value, 0.0), upper)


def dual_update(dual: DualState, g_estimate: float, in_place: bool = False) -> DualState:
    """
    One projected ascent step lambda' = clip(lambda + eta * g, 0, lambda_max).

    Returns a new state unless ``in_place`` is set, in which case ``dual`` is
    advanced and returned (the training loop uses this to avoid copying the
    history at every step).
    """
    if not math.isfinite(g_estimate):
        raise NumericalError(f"non-finite constraint estimate {g_estimate!r}")
    new_lam = _project(dual.lam + dual.eta_lambda * g_estimate, dual.lambda_max)
    iteration = dual.iteration + 1
    record = iteration % dual.history_stride == 0
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(f"dual update {iteration}: g={g_estimate:.5f} lambda {dual.lam:.5f} -> {new_lam:.5f}")
    if in_place:
        dual.lam = new_lam
        dual.iteration = iteration
        if record:
            dual.history.append((iteration, new_lam, float(g_estimate)))
        return dual
    history = list(dual.history)
    if record:
        history.append((iteration, new_lam, float(g_estimate)))
    return replace(dual, lam=new_lam, iteration=iteration, history=history)


def kkt_check(dual: Union[DualState, float], g_estimate: float, epsilon: float = 0.05) -> KKTRecord:
    """Residual |lambda * g|, feasibility g <= 0, relative tolerance eps * (1 + lambda)."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    lam = dual.lam if isinstance(dual, DualState) else float(dual)
    return KKTRecord(
        lam=lam,
        g=float(g_estimate),
        residual=abs(lam * g_estimate),
        feasible=g_estimate <= 0.0,
        epsilon=epsilon,
    )


def lambda_trace_frame(
    dual: Union[DualState, Sequence[Tuple[int, float, float]]], epsilon: float = 0.05
) -> pd.DataFrame:
    """Multiplier history (of a DualState or a raw history list) with residual and satisfied columns."""
    history = dual.history if isinstance(dual, DualState) else dual
    rows = []
    for iteration, lam, g in history:
        record = kkt_check(lam, g, epsilon)
        rows.append(
            {
                "iteration": iteration,
                "lambda": lam,
                "g_estimate": g,
                "residual": record.residual,
                "satisfied": record.satisfied,
            }
        )
    return pd.DataFrame(rows, columns=["iteration", "lambda", "g_estimate", "residual", "satisfied"])
