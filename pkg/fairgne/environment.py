"""
Environment interface shared by the rescue simulator and the chore game.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, List, Sequence

from .fairness import jain_index


@dataclass
class StepOutcome:
    """Result of one joint step."""

    next_state: Any
    team_reward: float
    workload_delta: List[int]
    done: bool
    success: bool
    fairness_value: float
    info: Dict[str, Any] = field(default_factory=dict)


class MultiAgentEnv(ABC):
    """
    Abstract base class for cooperative environments the learners train on.

    Actions are integer indices in ``range(n_actions)`` per agent; states are
    opaque to the learner, which only sees ``state_key(state)``.
    """

    n_agents: int
    n_actions: int
    horizon: int
    noop_action: int = 0

    @abstractmethod
    def reset(self, seed: int = 0) -> Any:
        """
        Start a new episode.

        Args:
            seed: Seed for any stochastic features

        Returns:
            The initial state
        """
        pass

    @abstractmethod
    def step(self, joint_action: Sequence[Any]) -> StepOutcome:
        """
        Advance the current episode by one joint action.

        Args:
            joint_action: One action per agent

        Returns:
            The step outcome
        """
        pass

    @abstractmethod
    def state_key(self, state: Any) -> Hashable:
        """Canonical hashable key of a state for tabular learners."""
        pass

    @abstractmethod
    def workload(self, state: Any) -> List[int]:
        """Per-agent workload counters of a state."""
        pass

    def stations(self, state: Any) -> List[Any]:
        """Per-agent location labels for traces; empty when not spatial."""
        return []

    def potential(self, state: Any) -> float:
        """Progress potential of a state (0 when the environment has none)."""
        return 0

    def fairness(self, state: Any) -> float:
        return jain_index(self.workload(state))

    def action_label(self, action: int) -> str:
        return str(action)
