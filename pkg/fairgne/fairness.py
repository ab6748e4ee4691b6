"""
Fairness indices and constraint-violation functionals.

Jain's index drives the fairness constraint g = tau - F(w); the Gini index is
only used by the fixed-penalty baseline.
"""

from dataclasses import dataclass, field
from typing import List, Sequence, Union

import numpy as np

from .errors import DomainError

ArrayLike = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True)
class FairnessThreshold:
    """Jain-index threshold tau, strictly inside (0, 1)."""

    tau: float

    def __post_init__(self):
        if not 0.0 < float(self.tau) < 1.0:
            raise DomainError(f"fairness threshold must lie in (0, 1), got {self.tau}")


@dataclass
class ViolationRecord:
    """Per-step violations of one episode and their discounted total."""

    per_step_g: List[float]
    gamma: float
    discounted_total: float = field(init=False)

    def __post_init__(self):
        self.discounted_total = _discounted_sum(self.per_step_g, self.gamma)


def _as_workload(w: ArrayLike) -> np.ndarray:
    arr = np.asarray(w, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] == 0:
        raise DomainError("workload vector must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"workload entries must be finite, got {w!r}")
    if np.any(arr < 0):
        raise DomainError(f"workload entries must be non-negative, got {w!r}")
    return arr


def _tau_value(tau: Union[float, FairnessThreshold]) -> float:
    return tau.tau if isinstance(tau, FairnessThreshold) else FairnessThreshold(float(tau)).tau


def jain_index(w: ArrayLike) -> Union[float, np.ndarray]:
    """
    Jain's fairness index (sum w)^2 / (n * sum w^2).

    Accepts a single vector or a stack of vectors along the last axis. The
    all-zero vector is defined as perfectly fair (1.0).
    """
    arr = _as_workload(w)
    n = arr.shape[-1]
    total = arr.sum(axis=-1)
    squares = (arr * arr).sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(total > 0, total * total / (n * np.where(squares > 0, squares, 1.0)), 1.0)
    return float(value) if arr.ndim == 1 else value


def gini_index(w: ArrayLike) -> Union[float, np.ndarray]:
    """
    Gini index sum_ij |w_i - w_j| / (2 n sum w); zero for the all-zero vector.
    """
    arr = _as_workload(w)
    n = arr.shape[-1]
    total = arr.sum(axis=-1)
    spread = np.abs(arr[..., :, None] - arr[..., None, :]).sum(axis=(-1, -2))
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(total > 0, spread / (2.0 * n * np.where(total > 0, total, 1.0)), 0.0)
    return float(value) if arr.ndim == 1 else value


def statewise_violation(w: ArrayLike, tau: Union[float, FairnessThreshold]) -> float:
    """g(s) = tau - F(w); non-positive when the constraint holds."""
    return _tau_value(tau) - jain_index(w)


def _discounted_sum(values: Sequence[float], gamma: float) -> float:
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"discount must lie in (0, 1), got {gamma}")
    if len(values) == 0:
        raise DomainError("cannot discount an empty sequence")
    arr = np.asarray(values, dtype=float)
    return float(np.dot(gamma ** np.arange(arr.size), arr))


def discounted_violation(trace, tau: Union[float, FairnessThreshold], gamma: float) -> float:
    """
    Sum_t gamma^t (tau - F(w_t)) over one episode.

    ``trace`` is an EpisodeTrace or any sequence of per-step Jain values.
    """
    jfi = trace.jfi_series() if hasattr(trace, "jfi_series") else list(trace)
    if len(jfi) == 0:
        raise DomainError("cannot compute the violation of an empty trace")
    tau_value = _tau_value(tau)
    return _discounted_sum([tau_value - f for f in jfi], gamma)


def violation_record(trace, tau: Union[float, FairnessThreshold], gamma: float) -> ViolationRecord:
    """Build the per-step violation record of an episode."""
    jfi = trace.jfi_series() if hasattr(trace, "jfi_series") else list(trace)
    tau_value = _tau_value(tau)
    return ViolationRecord(per_step_g=[tau_value - f for f in jfi], gamma=gamma)
