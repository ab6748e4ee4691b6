"""
Unconstrained Learner Implementation
"""

from typing import Any, Dict, List, Optional, Sequence

from fairgne.base_learner import BaseLearner


class UnconstrainedLearner(BaseLearner):
    """
    Baseline that maximizes team return only; the multiplier is identically zero.
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        name = "unconstrained"
        description = "Tabular TD learning on the raw team reward"
        super().__init__(name, description, config)

    def shaped_reward(self, reward: float, workload: Sequence[int], fairness: float) -> float:
        return reward

    def get_capabilities(self) -> List[str]:
        return ["Team-return maximization", "Reference point for the fairness penalties"]
