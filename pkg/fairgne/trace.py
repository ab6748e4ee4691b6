"""
Episode traces: one record per environment step, exportable as CSV.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd


@dataclass
class StepRecord:
    """Everything observed at one environment step."""

    t: int
    stations: Sequence[Any]
    actions: Sequence[Any]
    team_reward: float
    shaped_reward: float
    jfi: float
    g: float
    lam: float
    workload: Sequence[int]
    potential: int
    fallbacks: int = 0


@dataclass
class EpisodeTrace:
    """
    Per-step history of one episode plus its outcome.

    ``lam`` on each step is the multiplier active when the step was taken.
    """

    n_agents: int
    steps: List[StepRecord] = field(default_factory=list)
    success: bool = False
    seed: Optional[int] = None

    def append(self, record: StepRecord):
        self.steps.append(record)

    def __len__(self) -> int:
        return len(self.steps)

    def jfi_series(self) -> List[float]:
        return [s.jfi for s in self.steps]

    def g_series(self) -> List[float]:
        return [s.g for s in self.steps]

    @property
    def total_reward(self) -> float:
        return float(sum(s.team_reward for s in self.steps))

    @property
    def final_workload(self) -> List[int]:
        return list(self.steps[-1].workload) if self.steps else [0] * self.n_agents

    @property
    def final_potential(self) -> int:
        return self.steps[-1].potential if self.steps else 0

    @property
    def mean_lambda(self) -> float:
        return float(sum(s.lam for s in self.steps) / len(self.steps)) if self.steps else 0.0

    @property
    def fallbacks(self) -> int:
        return sum(s.fallbacks for s in self.steps)

    def to_frame(self) -> pd.DataFrame:
        """Flatten the trace into the per-step CSV schema."""
        rows: List[Dict[str, Any]] = []
        for s in self.steps:
            row: Dict[str, Any] = {"t": s.t}
            for i in range(self.n_agents):
                row[f"station_{i}"] = _label(s.stations[i]) if i < len(s.stations) else ""
            for i in range(self.n_agents):
                row[f"action_{i}"] = _label(s.actions[i])
            row.update(
                team_reward=s.team_reward,
                shaped_reward=s.shaped_reward,
                jfi=s.jfi,
                g=s.g,
                **{"lambda": s.lam},
            )
            rows.append(row)
        return pd.DataFrame(rows)


def _label(value: Any) -> str:
    return getattr(value, "value", value) if value is not None else ""


def traces_to_frame(traces: Sequence[EpisodeTrace]) -> pd.DataFrame:
    """Concatenate several traces with an ``episode`` column."""
    frames = []
    for idx, trace in enumerate(traces):
        frame = trace.to_frame()
        frame.insert(0, "episode", idx)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
