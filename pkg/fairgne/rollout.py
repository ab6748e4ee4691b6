"""
Greedy (epsilon = 0) rollouts and Monte Carlo constraint estimates.
"""

import logging
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .config import EnvConfig
from .environment import MultiAgentEnv
from .errors import DomainError
from .fairness import discounted_violation
from .trace import EpisodeTrace, StepRecord

logger = logging.getLogger("fairgne.rollout")

Shaper = Callable[[float, Sequence[int], float], float]


def make_env(config: Union[EnvConfig, MultiAgentEnv, None] = None) -> MultiAgentEnv:
    """Build the environment an EnvConfig describes."""
    if isinstance(config, MultiAgentEnv):
        return config
    config = config or EnvConfig()
    if config.kind == "chore":
        from .chore_game import ChoreGameEnv

        return ChoreGameEnv(config)
    from .sim_core import RescueBreathSim

    return RescueBreathSim(config)


def greedy_rollout(
    policy,
    env_config: Union[EnvConfig, MultiAgentEnv, None],
    seed: int = 0,
    tau: float = 0.85,
    lam: float = 0.0,
    shaper: Optional[Shaper] = None,
) -> EpisodeTrace:
    """
    Play one episode with the greedy policy.

    Args:
        policy: A GreedyPolicy (anything with ``act(key)`` and a ``table``)
        env_config: Environment to play on
        seed: Environment seed
        tau: Threshold used for the per-step violation g = tau - F
        lam: Multiplier recorded on every step
        shaper: ``(r, workload, F) -> shaped r``; defaults to r - lam * (tau - F)

    Returns:
        The episode trace; states absent from the policy resolve to noop for
        every agent and are counted in ``fallbacks``
    """
    env = make_env(env_config)
    state = env.reset(seed)
    trace = EpisodeTrace(n_agents=env.n_agents, seed=seed)
    table = getattr(policy, "table", None)
    while True:
        key = env.state_key(state)
        if table is not None and key not in table:
            actions = (env.noop_action,) * env.n_agents
            fallbacks = env.n_agents
        else:
            actions = tuple(policy.act(key))
            fallbacks = 0
        outcome = env.step(actions)
        state = outcome.next_state
        fairness = outcome.fairness_value
        r = outcome.team_reward
        shaped = shaper(r, env.workload(state), fairness) if shaper else r - lam * (tau - fairness)
        trace.append(
            StepRecord(
                t=len(trace),
                stations=env.stations(state),
                actions=[env.action_label(a) for a in actions],
                team_reward=r,
                shaped_reward=shaped,
                jfi=fairness,
                g=tau - fairness,
                lam=lam,
                workload=env.workload(state),
                potential=env.potential(state),
                fallbacks=fallbacks,
            )
        )
        if outcome.done:
            trace.success = outcome.success
            break
    if trace.fallbacks:
        logger.debug(f"rollout seed {seed}: {trace.fallbacks} noop fallbacks on unseen states")
    return trace


def evaluate_policy(
    policy,
    env_config: Union[EnvConfig, MultiAgentEnv, None],
    episodes: int,
    seeds: Optional[Sequence[int]] = None,
    tau: float = 0.85,
    lam: float = 0.0,
) -> List[EpisodeTrace]:
    """Run ``episodes`` greedy rollouts, seeded 0..episodes-1 unless given."""
    seeds = list(seeds) if seeds is not None else list(range(episodes))
    return [greedy_rollout(policy, env_config, seed=s, tau=tau, lam=lam) for s in seeds[:episodes]]


def estimate_constraint(
    policy,
    env_config: Union[EnvConfig, MultiAgentEnv, None],
    M: int,
    gamma: float,
    tau: float,
    seeds: Optional[Sequence[int]] = None,
) -> float:
    """Mean discounted violation over M greedy rollouts."""
    if M < 1:
        raise DomainError(f"at least one rollout is needed, got M={M}")
    seeds = list(seeds) if seeds is not None else list(range(M))
    if len(seeds) < M:
        raise DomainError(f"{M} rollouts requested but only {len(seeds)} seeds given")
    values = [
        discounted_violation(greedy_rollout(policy, env_config, seed=s, tau=tau), tau, gamma) for s in seeds[:M]
    ]
    return float(np.mean(values))
