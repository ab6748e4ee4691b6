"""
Base Learner Module - Defines the foundation for all penalty learners.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import EnvConfig, TrainConfig
from .environment import StepOutcome
from .errors import NumericalError
from .metrics_stats import EvalSummary, summarize
from .q_table import GreedyPolicy, QTable, resolve_backbone
from .rollout import evaluate_policy, make_env

EVAL_SEED_BASE = 10_000


@dataclass
class EvaluationPoint:
    """Greedy-evaluation metrics at one checkpoint."""

    episode: int
    env_steps: int
    lam: float
    summary: EvalSummary

    @property
    def feasible(self) -> bool:
        return self.summary.mean_violation <= 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {"episode": self.episode, "env_steps": self.env_steps, "lambda": self.lam, **self.summary.to_dict()}


@dataclass
class TrainReport:
    """
    Outcome of one training run.

    ``policy`` is the policy handed out under ``select_policy``: the best
    feasible checkpoint when one exists and was requested, the final greedy
    policy otherwise.
    """

    learner: str
    method: str
    seed: int
    evaluations: List[EvaluationPoint]
    final_policy: GreedyPolicy
    best_feasible_policy: Optional[GreedyPolicy]
    best_feasible_episode: Optional[int]
    lambda_history: List[Tuple[int, float, float]]
    final_lambda: float
    env_steps: int
    select_policy: str = "best_feasible"
    config: Dict[str, Any] = field(default_factory=dict)
    best_feasible_lambda: Optional[float] = None

    @property
    def policy(self) -> GreedyPolicy:
        if self.select_policy == "best_feasible" and self.best_feasible_policy is not None:
            return self.best_feasible_policy
        return self.final_policy

    @property
    def selected(self) -> str:
        return "best_feasible" if self.policy is self.best_feasible_policy else "final"

    @property
    def policy_lambda(self) -> float:
        """Multiplier in force when the handed-out policy was snapshotted."""
        if self.selected == "best_feasible" and self.best_feasible_lambda is not None:
            return self.best_feasible_lambda
        return self.final_lambda

    def to_dict(self) -> Dict[str, Any]:
        return {
            "learner": self.learner,
            "method": self.method,
            "seed": self.seed,
            "env_steps": self.env_steps,
            "final_lambda": self.final_lambda,
            "selected_policy": self.selected,
            "policy_lambda": self.policy_lambda,
            "best_feasible_episode": self.best_feasible_episode,
            "evaluations": [e.to_dict() for e in self.evaluations],
            "lambda_history": [list(h) for h in self.lambda_history],
            "config": self.config,
        }


class BaseLearner(ABC):
    """
    Abstract base class for all tabular penalty learners.

    Owns the epsilon-greedy TD loop; subclasses only decide how the team
    reward is shaped and how (if at all) a multiplier moves.
    """

    # learners whose report may hand out the best feasible checkpoint
    tracks_feasibility = False

    def __init__(self, name: str, description: str, config: Optional[Dict[str, Any]] = None):
        """
        Initialize the base learner.

        Args:
            name: The name of the learner
            description: A brief description of the penalty it trains on
            config: Optional mapping with ``env`` and ``train`` sections
                (plain dicts or EnvConfig / TrainConfig objects)
        """
        self.name = name
        self.description = description
        self.config = config or {}
        self.logger = logging.getLogger(f"fairgne.learners.{name}")
        env = self.config.get("env")
        train = self.config.get("train")
        self.env_config = env if isinstance(env, EnvConfig) else EnvConfig.from_dict(env)
        self.train_config = train if isinstance(train, TrainConfig) else TrainConfig.from_dict(train)
        self.penalty = self.train_config.penalty
        self.env = make_env(self.env_config)
        self.table = QTable(
            resolve_backbone(self.train_config.backbone, self.env.n_agents),
            self.env.n_agents,
            self.env.n_actions,
            self.env.noop_action,
        )
        self.env_steps = 0
        self._initialize_learner()

    def _initialize_learner(self):
        """Set up the learner with any penalty-specific state."""
        self.logger.info(f"Initializing learner: {self.name} ({self.table.mode}, seed {self.train_config.seed})")

    @property
    def tau(self) -> float:
        return self.train_config.tau

    @abstractmethod
    def shaped_reward(self, reward: float, workload: Sequence[int], fairness: float) -> float:
        """
        Shape the team reward of one transition.

        Args:
            reward: Team reward r_t
            workload: Workload vector after the step
            fairness: Jain index of that workload

        Returns:
            The reward the TD update learns from
        """
        pass

    @abstractmethod
    def get_capabilities(self) -> List[str]:
        """
        Return a list of the learner's capabilities.

        Returns:
            A list of capability descriptions
        """
        pass

    def on_step(self, outcome: StepOutcome):
        """Called after every training transition."""

    def on_episode_end(self, jfi_series: List[float]):
        """Called with the per-step Jain values of every finished training episode."""

    def current_lambda(self) -> float:
        return 0.0

    def lambda_history(self) -> List[Tuple[int, float, float]]:
        return []

    def epsilon(self, episode: int) -> float:
        """Linear decay from epsilon_start to epsilon_end over the decay fraction of training."""
        cfg = self.train_config
        horizon = max(1, int(cfg.episodes * cfg.epsilon_decay_fraction))
        frac = min(1.0, episode / horizon)
        return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac

    def evaluate(
        self, policy: Optional[GreedyPolicy] = None, episodes: Optional[int] = None
    ) -> Tuple[EvalSummary, list]:
        """
        Greedy evaluation at the current multiplier.

        Returns:
            The summary and the evaluation traces
        """
        policy = policy or GreedyPolicy(self.table)
        episodes = episodes or self.train_config.eval_episodes
        seeds = range(EVAL_SEED_BASE, EVAL_SEED_BASE + episodes)
        traces = evaluate_policy(policy, self.env, episodes, seeds=seeds, tau=self.tau, lam=self.current_lambda())
        epsilon_kkt = self.penalty.dual.epsilon_kkt if self.penalty.dual else 0.05
        summary = summarize(traces, tau=self.tau, epsilon_kkt=epsilon_kkt, gamma=self.train_config.gamma)
        fallbacks = sum(t.fallbacks for t in traces)
        if fallbacks:
            self.logger.warning(f"{fallbacks} agent actions fell back to noop on states never visited in training")
        return summary, traces

    def train(self) -> TrainReport:
        """
        Run epsilon-greedy TD learning on the shaped reward.

        Returns:
            The TrainReport with one EvaluationPoint per checkpoint
        """
        cfg = self.train_config
        rng = np.random.default_rng(cfg.seed)
        evaluations: List[EvaluationPoint] = []
        best: Optional[Tuple[EvaluationPoint, GreedyPolicy]] = None
        self.logger.info(f"Training {self.penalty.label} for {cfg.episodes} episodes")

        for episode in range(cfg.episodes):
            eps = self.epsilon(episode)
            state = self.env.reset(seed=int(rng.integers(0, 2 ** 31 - 1)))
            jfi_series: List[float] = []
            done = False
            while not done:
                key = self.env.state_key(state)
                joint = self.table.select(key, eps, rng)
                outcome = self.env.step(joint)
                state = outcome.next_state
                reward = self.shaped_reward(outcome.team_reward, self.env.workload(state), outcome.fairness_value)
                if not math.isfinite(reward):
                    raise NumericalError(f"non-finite shaped reward {reward!r}", state_key=key)
                self.table.update(
                    key, joint, reward, self.env.state_key(state), outcome.done, cfg.alpha, cfg.gamma
                )
                self.env_steps += 1
                jfi_series.append(outcome.fairness_value)
                self.on_step(outcome)
                done = outcome.done
            self.on_episode_end(jfi_series)

            if (episode + 1) % cfg.eval_every == 0 or episode + 1 == cfg.episodes:
                summary, _ = self.evaluate()
                point = EvaluationPoint(
                    episode=episode + 1, env_steps=self.env_steps, lam=self.current_lambda(), summary=summary
                )
                evaluations.append(point)
                self.logger.info(
                    f"episode {episode + 1}: success={summary.success_rate:.2f} jfi={summary.mean_jfi:.3f} "
                    f"lambda={point.lam:.4f} violation={summary.mean_violation:.4f}"
                )
                # ties go to the later checkpoint
                if self.tracks_feasibility and point.feasible:
                    if best is None or summary.mean_return >= best[0].summary.mean_return:
                        best = (point, self.table.policy())

        return TrainReport(
            learner=self.name,
            method=self.penalty.slug,
            seed=cfg.seed,
            evaluations=evaluations,
            final_policy=self.table.policy(),
            best_feasible_policy=best[1] if best else None,
            best_feasible_episode=best[0].episode if best else None,
            best_feasible_lambda=best[0].lam if best else None,
            lambda_history=list(self.lambda_history()),
            final_lambda=self.current_lambda(),
            env_steps=self.env_steps,
            select_policy=cfg.select_policy,
            config={"env": self.env_config.to_dict(), "train": self.train_config.to_dict()},
        )

    def health_check(self) -> Dict[str, Any]:
        """
        Verify the learner is functioning properly.

        Returns:
            A dictionary with health status information
        """
        return {
            "status": "healthy",
            "name": self.name,
            "backbone": self.table.mode,
            "states": self.table.n_states,
            "version": self.__class__.__module__,
        }

    def __str__(self) -> str:
        return f"{self.name}: {self.description}"
