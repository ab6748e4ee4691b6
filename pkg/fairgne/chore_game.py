"""
Two-agent chore game: each agent either works or rests.

The task is done when at least one agent works; every worker pays a small
cost. Work is the only thing credited to the workload counters, so the
free-riding profiles (one works, one rests) have the best team return and the
worst fairness, which makes the game a compact check of the dual machinery.
"""

import logging
from typing import Hashable, List, Optional, Sequence, Tuple

from .config import EnvConfig
from .environment import MultiAgentEnv, StepOutcome
from .errors import InterfaceError, LifecycleError
from .fairness import jain_index
from .gne_oracle import FiniteGame

logger = logging.getLogger("fairgne.sim.chore")

WORK = 0
REST = 1
CHORE_ACTIONS = ("work", "rest")


def chore_payoff(profile: Sequence[int], work_value: float = 1.0, work_cost: float = 0.1) -> Tuple[float, List[int]]:
    """Team return and workload of one joint work/rest choice."""
    workers = [1 if a == WORK else 0 for a in profile]
    value = work_value if any(workers) else 0.0
    return value - work_cost * sum(workers), workers


def chore_game(tau: float = 0.9, work_value: float = 1.0, work_cost: float = 0.1) -> FiniteGame:
    """
    The chore game as a finite game with the long-run average return.

    Profile indices follow (work, work), (work, rest), (rest, work), (rest, rest).
    """

    def evaluate(profile):
        return chore_payoff(profile, work_value, work_cost)

    return FiniteGame(
        policy_sets=[list(CHORE_ACTIONS), list(CHORE_ACTIONS)],
        evaluator=evaluate,
        tau=tau,
        name="chore",
        evaluation="average",
    )


def switching_lambda(work_value: float = 1.0, work_cost: float = 0.1, tau: float = 0.9) -> float:
    """
    Multiplier at which (work, work) and a free-riding profile tie:
    R(w,r) - lambda * g(w,r) == R(w,w) - lambda * g(w,w).
    """
    gap_return = work_cost
    # JFI is 1/2 for a free-riding profile and 1 for (work, work)
    gap_violation = (tau - 0.5) - (tau - 1.0)
    value = gap_return / gap_violation
    logger.debug(f"chore switching multiplier {value:.4f} (work cost {work_cost:g}, tau {tau:g})")
    return value


class ChoreGameEnv(MultiAgentEnv):
    """
    Repeated chore game with a fixed horizon so it can be trained on like the
    simulator. The state is the round counter only; the workload accumulates
    the number of rounds each agent worked.
    """

    def __init__(self, config: Optional[EnvConfig] = None):
        self.config = (config or EnvConfig(kind="chore", n_agents=2, horizon=10)).validate()
        self.n_agents = 2
        self.n_actions = len(CHORE_ACTIONS)
        self.noop_action = REST
        self.horizon = self.config.horizon
        self.state: Optional[Tuple[int, Tuple[int, int]]] = None

    def reset(self, seed: int = 0):
        self.state = (0, (0, 0))
        logger.debug(f"reset chore episode of {self.horizon} rounds")
        return self.state

    def step(self, joint_action: Sequence[int]) -> StepOutcome:
        if self.state is None:
            raise LifecycleError("reset() must be called before step()")
        if len(joint_action) != 2:
            raise InterfaceError(f"expected 2 actions, got {len(joint_action)}")
        actions = [self._coerce(a) for a in joint_action]
        t, workload = self.state
        if t >= self.horizon:
            raise LifecycleError("episode horizon already reached")
        reward, delta = chore_payoff(actions, self.config.work_value, self.config.work_cost)
        new_workload = tuple(w + d for w, d in zip(workload, delta))
        self.state = (t + 1, new_workload)
        done = t + 1 >= self.horizon
        return StepOutcome(
            next_state=self.state,
            team_reward=reward,
            workload_delta=delta,
            done=done,
            success=done,
            fairness_value=jain_index(new_workload),
            info={"effective_actions": actions},
        )

    @staticmethod
    def _coerce(action) -> int:
        if isinstance(action, str):
            try:
                return CHORE_ACTIONS.index(action)
            except ValueError as exc:
                raise InterfaceError(f"unknown chore action {action!r}") from exc
        if int(action) not in (WORK, REST):
            raise InterfaceError(f"unknown chore action {action!r}")
        return int(action)

    def state_key(self, state) -> Hashable:
        # stationary game: a single state lets the learner converge to a profile
        return ()

    def workload(self, state) -> List[int]:
        return list(state[1])

    def action_label(self, action: int) -> str:
        return CHORE_ACTIONS[int(action)]
