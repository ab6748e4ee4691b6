"""
Fixed Penalty Learner Implementation
"""

from typing import Any, Dict, List, Optional, Sequence

from fairgne.base_learner import BaseLearner
from fairgne.fairness import gini_index


class FixedPenaltyLearner(BaseLearner):
    """
    The FixedPenalty learner is responsible for:
    1. Penalizing the Gini index of the running workload, r - lambda * G(w_t)
    2. Or penalizing the Jain shortfall, r - lambda * (tau - F(w_t))
    3. Reporting its constant weight as the multiplier at every evaluation
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        Initialize the FixedPenalty learner.

        Args:
            config: Optional mapping with ``env`` and ``train`` sections
        """
        name = "fixed_penalty"
        description = "Tabular TD learning with a hand-picked fairness penalty weight"
        super().__init__(name, description, config)

    def _initialize_learner(self):
        super()._initialize_learner()
        self.weight = self.penalty.lambda_fixed
        self.index = self.penalty.index
        self.logger.info(f"Using {self.index} penalty with fixed weight {self.weight:g}")

    def shaped_reward(self, reward: float, workload: Sequence[int], fairness: float) -> float:
        if self.index == "gini":
            return reward - self.weight * gini_index(workload)
        return reward - self.weight * (self.penalty.tau - fairness)

    def current_lambda(self) -> float:
        return self.weight

    def get_capabilities(self) -> List[str]:
        return [
            "Gini-index penalty r - lambda * G(w)",
            "Jain-shortfall penalty r - lambda * (tau - F(w))",
        ]
