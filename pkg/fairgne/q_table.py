"""
Tabular action-value storage for the two backbones.

``centralized_joint`` keeps one row of ``n_actions ** n_agents`` joint-action
values per state; ``independent_per_agent`` keeps one row of ``n_actions``
values per agent and state, each agent learning from the shared reward.
"""

import ast
import json
import logging
import math
from collections import defaultdict
from typing import Any, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ArtifactIOError, ConfigurationError, NumericalError

logger = logging.getLogger("fairgne.qtable")

MODES = ("centralized_joint", "independent_per_agent")


def resolve_backbone(backbone: str, n_agents: int) -> str:
    """``auto`` picks the joint table for two agents and independent tables otherwise."""
    if backbone == "auto":
        return "centralized_joint" if n_agents == 2 else "independent_per_agent"
    if backbone not in MODES:
        raise ConfigurationError(f"unknown backbone {backbone!r}")
    return backbone


class QTable:
    """
    Action values with greedy and epsilon-greedy selection.

    Greedy ties resolve to the lowest action index. States never visited
    resolve to ``noop_action`` for every agent.
    """

    def __init__(self, mode: str, n_agents: int, n_actions: int, noop_action: int = 0):
        if mode not in MODES:
            raise ConfigurationError(f"unknown backbone {mode!r}")
        self.mode = mode
        self.n_agents = n_agents
        self.n_actions = n_actions
        self.noop_action = noop_action
        self.joint_shape = (n_actions,) * n_agents
        if mode == "centralized_joint":
            width = n_actions ** n_agents
            self.tables: List[Dict[Hashable, np.ndarray]] = [defaultdict(lambda: np.zeros(width))]
        else:
            self.tables = [defaultdict(lambda: np.zeros(n_actions)) for _ in range(n_agents)]

    @property
    def n_states(self) -> int:
        return max(len(t) for t in self.tables)

    def __contains__(self, key: Hashable) -> bool:
        return all(key in t for t in self.tables)

    def greedy(self, key: Hashable) -> Tuple[int, ...]:
        if key not in self:
            return (self.noop_action,) * self.n_agents
        if self.mode == "centralized_joint":
            flat = int(np.argmax(self.tables[0][key]))
            return tuple(int(a) for a in np.unravel_index(flat, self.joint_shape))
        return tuple(int(np.argmax(t[key])) for t in self.tables)

    def select(self, key: Hashable, epsilon: float, rng: np.random.Generator) -> Tuple[int, ...]:
        """Epsilon-greedy; independent agents explore independently."""
        if self.mode == "centralized_joint":
            if rng.random() < epsilon:
                return tuple(int(a) for a in rng.integers(0, self.n_actions, size=self.n_agents))
            flat = int(np.argmax(self.tables[0][key]))
            return tuple(int(a) for a in np.unravel_index(flat, self.joint_shape))
        actions = []
        for table in self.tables:
            if rng.random() < epsilon:
                actions.append(int(rng.integers(0, self.n_actions)))
            else:
                actions.append(int(np.argmax(table[key])))
        return tuple(actions)

    def update(
        self,
        key: Hashable,
        joint_action: Sequence[int],
        reward: float,
        next_key: Hashable,
        done: bool,
        alpha: float,
        gamma: float,
    ) -> float:
        """
        One TD(0) step on every table touched by ``joint_action``.

        Returns the largest absolute TD error.
        """
        if not math.isfinite(reward):
            raise NumericalError(f"non-finite reward {reward!r}", state_key=key)
        if self.mode == "centralized_joint":
            cells = [(self.tables[0], int(np.ravel_multi_index(tuple(joint_action), self.joint_shape)))]
        else:
            cells = [(table, int(a)) for table, a in zip(self.tables, joint_action)]
        worst = 0.0
        for table, idx in cells:
            bootstrap = 0.0 if done else gamma * float(np.max(table[next_key]))
            row = table[key]
            td_error = reward + bootstrap - row[idx]
            row[idx] += alpha * td_error
            if not math.isfinite(row[idx]):
                raise NumericalError(f"non-finite action value at action {idx}", state_key=key)
            worst = max(worst, abs(td_error))
        return worst

    def copy(self) -> "QTable":
        clone = QTable(self.mode, self.n_agents, self.n_actions, self.noop_action)
        for src, dst in zip(self.tables, clone.tables):
            for key, row in src.items():
                dst[key] = row.copy()
        return clone

    def policy(self) -> "GreedyPolicy":
        return GreedyPolicy(self.copy())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "n_agents": self.n_agents,
            "n_actions": self.n_actions,
            "noop_action": self.noop_action,
            "tables": [{repr(k): row.tolist() for k, row in t.items()} for t in self.tables],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "QTable":
        table = cls(data["mode"], data["n_agents"], data["n_actions"], data.get("noop_action", 0))
        for dst, rows in zip(table.tables, data["tables"]):
            for key, row in rows.items():
                dst[ast.literal_eval(key)] = np.asarray(row, dtype=float)
        return table


class GreedyPolicy:
    """Frozen greedy policy over a snapshot of a Q-table."""

    def __init__(self, table: QTable):
        self.table = table

    @property
    def n_agents(self) -> int:
        return self.table.n_agents

    def act(self, key: Hashable) -> Tuple[int, ...]:
        return self.table.greedy(key)

    __call__ = act

    def save(self, path: str, metadata: Optional[Dict[str, Any]] = None):
        payload = {"metadata": metadata or {}, "q_table": self.table.to_dict()}
        try:
            with open(path, "w", encoding="utf-8") as handle:
                json.dump(payload, handle)
        except OSError as exc:
            raise ArtifactIOError(f"cannot write policy to {path}: {exc}") from exc
        logger.info(f"saved greedy policy with {self.table.n_states} states to {path}")

    @classmethod
    def load(cls, path: str) -> "GreedyPolicy":
        try:
            with open(path, "r", encoding="utf-8") as handle:
                payload = json.load(handle)
        except (OSError, ValueError) as exc:
            raise ArtifactIOError(f"cannot read policy from {path}: {exc}") from exc
        return cls(QTable.from_dict(payload["q_table"]))
