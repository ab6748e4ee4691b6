"""
Fair-GNE Learner Implementation
"""

from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from fairgne.base_learner import BaseLearner
from fairgne.constraint_dual import DualState, dual_update, shaped_reward
from fairgne.environment import StepOutcome
from fairgne.errors import ConfigurationError
from fairgne.fairness import discounted_violation
from fairgne.q_table import GreedyPolicy
from fairgne.rollout import estimate_constraint

MC_SEED_BASE = 20_000


class FairGNELearner(BaseLearner):
    """
    The FairGNE learner is responsible for:
    1. Learning on r - lambda * (tau - F(w_t)) at the current multiplier
    2. Moving lambda by projected dual ascent at the configured cadence
    3. Tracking the best feasible checkpoint for policy selection

    The violation estimate fed to the ascent step is the per-step statewise
    violation, the discounted violation of finished training episodes, or a
    Monte Carlo mean over greedy rollouts, depending on ``g_source``.
    """

    tracks_feasibility = True

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        Initialize the FairGNE learner.

        Args:
            config: Optional mapping with ``env`` and ``train`` sections; the
                train section must carry a ``fair_gne`` penalty
        """
        name = "fair_gne"
        description = "Primal-dual TD learning under a Jain-index fairness constraint"
        super().__init__(name, description, config)

    def _initialize_learner(self):
        super()._initialize_learner()
        if self.penalty.mode != "fair_gne" or self.penalty.dual is None:
            raise ConfigurationError("FairGNELearner needs a fair_gne penalty with a dual section")
        self.dual = DualState.from_config(self.penalty.dual, horizon=self.env.horizon)
        self._pending: List[float] = []
        self._since_update = 0
        self._mc_round = 0
        self.logger.info(
            f"Dual ascent: tau={self.dual.tau:g} eta={self.dual.eta_lambda:g} lambda_max={self.dual.lambda_max:g} "
            f"every {self.dual.update_period} {self.dual.update_unit}(s) on {self.dual.g_source} violations"
        )

    def shaped_reward(self, reward: float, workload: Sequence[int], fairness: float) -> float:
        return shaped_reward(reward, self.dual, fairness)

    def on_step(self, outcome: StepOutcome):
        if self.dual.update_unit != "step":
            return
        if self.dual.g_source == "statewise":
            self._pending.append(self.dual.tau - outcome.fairness_value)
        self._since_update += 1
        if self._since_update >= self.dual.update_period:
            self._ascend()

    def on_episode_end(self, jfi_series: List[float]):
        if self.dual.update_unit != "episode":
            return
        if self.dual.g_source == "episode":
            self._pending.append(discounted_violation(jfi_series, self.dual.tau, self.train_config.gamma))
        self._since_update += 1
        if self._since_update >= self.dual.update_period:
            self._ascend()

    def _estimate(self) -> float:
        if self.dual.g_source == "monte_carlo":
            m = self.dual.rollouts
            start = MC_SEED_BASE + self._mc_round * m
            self._mc_round += 1
            # a fresh environment keeps the training episode in progress untouched
            return estimate_constraint(
                GreedyPolicy(self.table),
                self.env_config,
                m,
                self.train_config.gamma,
                self.dual.tau,
                seeds=range(start, start + m),
            )
        return float(np.mean(self._pending))

    def _ascend(self):
        g = self._estimate()
        dual_update(self.dual, g, in_place=True)
        self._pending.clear()
        self._since_update = 0

    def current_lambda(self) -> float:
        return self.dual.lam

    def lambda_history(self) -> List[Tuple[int, float, float]]:
        return self.dual.history

    def health_check(self) -> Dict[str, Any]:
        status = super().health_check()
        status.update(lam=self.dual.lam, dual_iterations=self.dual.iteration)
        return status

    def get_capabilities(self) -> List[str]:
        return [
            "Adaptive fairness multiplier by projected dual ascent",
            "Per-step, per-episode and Monte Carlo constraint estimates",
            "Best feasible checkpoint selection",
        ]
