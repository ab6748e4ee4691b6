"""
Exact solver and verifier for finite constrained games.

Every joint profile of a finite game is enumerated once; the penalized
objective R(pi) - lambda * g(pi) is then maximized exactly, the multiplier
follows projected dual ascent, and the returned profile is checked for
complementary slackness and for the generalized Nash property (no agent has
a feasible unilateral deviation that raises the team return).
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import EnvConfig
from .constraint_dual import KKTRecord, kkt_check
from .errors import CapacityError, DomainError
from .fairness import jain_index

logger = logging.getLogger("fairgne.oracle")

Profile = Tuple[int, ...]
Evaluator = Callable[[Profile], Tuple[float, Sequence[float]]]

DEFAULT_ENUMERATION_CAP = 10 ** 6
TIE_TOLERANCE = 1e-12


@dataclass
class FiniteGame:
    """
    A game with finitely many policies per agent.

    ``evaluator`` maps a joint profile (one policy index per agent) to the
    team return R and the workload vector w. ``evaluation`` labels whether R
    is a long-run average or a discounted return.
    """

    policy_sets: List[List[str]]
    evaluator: Evaluator
    tau: float
    name: str = "game"
    evaluation: str = "average"
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP

    def __post_init__(self):
        if len(self.policy_sets) < 1 or any(len(p) == 0 for p in self.policy_sets):
            raise DomainError("every agent needs at least one policy")
        if not 0.0 < self.tau < 1.0:
            raise DomainError(f"tau must lie in (0, 1), got {self.tau}")

    @property
    def n_agents(self) -> int:
        return len(self.policy_sets)

    @property
    def size(self) -> int:
        return int(np.prod([len(p) for p in self.policy_sets], dtype=np.int64))

    def profile_label(self, profile: Profile) -> Tuple[str, ...]:
        return tuple(self.policy_sets[i][p] for i, p in enumerate(profile))


@dataclass
class ProfileTable:
    """Exhaustive (profile, R, w, g) table in lexicographic profile order."""

    game: FiniteGame
    profiles: np.ndarray
    returns: np.ndarray
    workloads: np.ndarray
    jfi: np.ndarray
    g: np.ndarray

    def __len__(self) -> int:
        return len(self.returns)

    @property
    def feasible(self) -> np.ndarray:
        return self.g <= 0.0

    def index_of(self, profile: Sequence[int]) -> int:
        matches = np.flatnonzero((self.profiles == np.asarray(profile)).all(axis=1))
        if matches.size == 0:
            raise DomainError(f"profile {tuple(profile)} is not part of the game")
        return int(matches[0])

    def profile(self, idx: int) -> Profile:
        return tuple(int(p) for p in self.profiles[idx])

    def label(self, idx: int) -> Tuple[str, ...]:
        return self.game.profile_label(self.profile(idx))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "profile": ["/".join(self.label(i)) for i in range(len(self))],
                "R": self.returns,
                "w": [tuple(w) for w in self.workloads],
                "jfi": self.jfi,
                "g": self.g,
            }
        )


@dataclass
class SaddleCertificate:
    """
    Outcome of exact dual ascent.

    ``pi_star`` is the best feasible profile seen (None when none was);
    ``lambda_star`` is the certified multiplier, ``lambda_final`` the last
    iterate. ``deviation_checked`` is set only when the SM-GNE deviation scan
    passed.
    """

    pi_star: Optional[int]
    lambda_star: float
    g_value: float
    kkt: KKTRecord
    deviation_checked: bool
    status: str
    lambda_final: float
    iterations: int
    switching_lambda: Optional[float] = None
    profile_label: Optional[Tuple[str, ...]] = None
    witness: Optional[Dict[str, Any]] = None

    @property
    def infeasible(self) -> bool:
        return self.pi_star is None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pi_star": self.pi_star,
            "profile": list(self.profile_label) if self.profile_label else None,
            "lambda_star": self.lambda_star,
            "lambda_final": self.lambda_final,
            "switching_lambda": self.switching_lambda,
            "g_value": self.g_value,
            "kkt": self.kkt.to_dict(),
            "deviation_checked": self.deviation_checked,
            "status": self.status,
            "iterations": self.iterations,
            "witness": self.witness,
        }


@dataclass
class AscentIterate:
    t: int
    lam: float
    profile: int
    g: float


def enumerate_profiles(game: FiniteGame, workers: int = 1) -> ProfileTable:
    """
    Evaluate every joint profile.

    Evaluation may run on a thread pool; results are always assembled in
    profile-index order so the table does not depend on ``workers``.
    """
    if game.size > game.enumeration_cap:
        raise CapacityError(f"{game.size} profiles exceed the enumeration cap of {game.enumeration_cap}")
    profiles = list(itertools.product(*[range(len(p)) for p in game.policy_sets]))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(game.evaluator, profiles))
    else:
        results = [game.evaluator(p) for p in profiles]
    returns = np.array([float(r) for r, _ in results])
    workloads = np.array([np.asarray(w, dtype=float) for _, w in results]).reshape(len(profiles), game.n_agents)
    jfi = np.atleast_1d(jain_index(workloads))
    logger.debug(f"enumerated {len(profiles)} profiles of {game.name}")
    return ProfileTable(
        game=game,
        profiles=np.array(profiles, dtype=int).reshape(len(profiles), game.n_agents),
        returns=returns,
        workloads=workloads,
        jfi=jfi,
        g=game.tau - jfi,
    )


def _table(game_or_table: Union[FiniteGame, ProfileTable]) -> ProfileTable:
    return game_or_table if isinstance(game_or_table, ProfileTable) else enumerate_profiles(game_or_table)


def exact_primal(game: Union[FiniteGame, ProfileTable], lam: float) -> int:
    """Index of argmax R - lambda * g; ties go to the lowest index."""
    table = _table(game)
    objective = table.returns - lam * table.g
    best = objective.max()
    return int(np.flatnonzero(objective >= best - TIE_TOLERANCE)[0])


def dual_function(game: Union[FiniteGame, ProfileTable], lam: float) -> float:
    """d(lambda) = max_pi R(pi) - lambda * g(pi)."""
    table = _table(game)
    return float((table.returns - lam * table.g).max())


def penalized_optimality_interval(table: ProfileTable, idx: int) -> Tuple[float, float]:
    """
    Multipliers at which profile ``idx`` maximizes the penalized objective.

    Returns ``(lo, hi)``; ``lo > hi`` means the profile is never optimal.
    """
    r0, g0 = table.returns[idx], table.g[idx]
    lo, hi = -math.inf, math.inf
    for r, g in zip(table.returns, table.g):
        if g > g0:
            lo = max(lo, (r - r0) / (g - g0))
        elif g < g0:
            hi = min(hi, (r0 - r) / (g0 - g))
        elif r > r0 + TIE_TOLERANCE:
            return math.inf, -math.inf
    return lo, hi


def verify_smgne(
    game: Union[FiniteGame, ProfileTable], profile: Union[int, Sequence[int]], tol: float = 0.0
) -> Tuple[bool, Optional[Dict[str, Any]]]:
    """
    Check that no agent has a feasible unilateral deviation raising R by more
    than ``tol``.

    Returns ``(True, None)`` on success, otherwise ``(False, witness)`` where
    the witness names the agent and deviation, or flags the profile itself
    as infeasible.
    """
    table = _table(game)
    idx = profile if isinstance(profile, (int, np.integer)) else table.index_of(profile)
    idx = int(idx)
    if table.g[idx] > 0.0:
        return False, {"reason": "infeasible_profile", "profile": list(table.label(idx)), "g": float(table.g[idx])}
    base = table.profile(idx)
    for agent, policies in enumerate(table.game.policy_sets):
        for alt in range(len(policies)):
            if alt == base[agent]:
                continue
            deviation = list(base)
            deviation[agent] = alt
            j = table.index_of(deviation)
            if table.g[j] <= 0.0 and table.returns[j] > table.returns[idx] + tol:
                return False, {
                    "reason": "profitable_deviation",
                    "agent": agent,
                    "deviation": policies[alt],
                    "gain": float(table.returns[j] - table.returns[idx]),
                }
    return True, None


def exact_dual_ascent(
    game: Union[FiniteGame, ProfileTable],
    eta: float,
    max_iter: int = 10000,
    lambda0: float = 0.0,
    lambda_max: float = 20.0,
    epsilon: float = 0.05,
    patience: int = 10,
    stall_tol: float = 1e-6,
    cycle_flips: int = 10,
) -> Tuple[SaddleCertificate, List[AscentIterate]]:
    """
    Projected dual ascent lambda <- [lambda + eta * g(pi_t)] with exact primal steps.

    Stops on an exact fixed point, on a feasible iterate whose multiplier has
    not moved by ``stall_tol`` over ``patience`` iterations, or when the
    iterates oscillate around a switching multiplier (finite profile sets
    rarely admit exact complementary slackness). The certificate reports the
    best feasible profile seen, with the multiplier projected onto the range
    where that profile is penalized-optimal.

    When the multiplier stops at ``lambda_max`` (or the iteration limit is
    hit) before any feasible iterate, the best feasible profile of the table
    is certified at the last multiplier with status ``capped`` (``max_iter``).
    Status ``infeasible`` means the game has no feasible profile at all.
    """
    if eta <= 0:
        raise DomainError("dual step size must be positive")
    table = _table(game)
    lam = float(min(max(lambda0, 0.0), lambda_max))
    log: List[AscentIterate] = []
    best: Optional[int] = None
    flips: List[int] = []
    status = "max_iter"
    switching: Optional[float] = None

    for t in range(max_iter):
        idx = exact_primal(table, lam)
        g = float(table.g[idx])
        log.append(AscentIterate(t=t, lam=lam, profile=idx, g=g))
        if g <= 0.0 and (best is None or table.returns[idx] > table.returns[best]):
            best = idx
        if t > 0 and (g > 0.0) != (log[-2].g > 0.0):
            flips.append(t)

        new_lam = min(max(lam + eta * g, 0.0), lambda_max)
        if new_lam == lam:
            status = "converged" if g <= 0.0 else ("infeasible" if best is None else "capped")
            break
        if g <= 0.0 and len(log) >= patience:
            recent = [it.lam for it in log[-patience:]] + [new_lam]
            if max(recent) - min(recent) < stall_tol:
                status = "converged"
                lam = new_lam
                break
        if best is not None and len(flips) >= cycle_flips:
            window = log[flips[-cycle_flips]:]
            flip_lams = [log[f].lam for f in flips[-cycle_flips:]]
            g_scale = max(abs(it.g) for it in window)
            if max(flip_lams) - min(flip_lams) <= 2.0 * eta * g_scale + TIE_TOLERANCE:
                lams = [it.lam for it in window]
                switching = 0.5 * (min(lams) + max(lams))
                status = "cycle"
                lam = new_lam
                break
        lam = new_lam

    iterations = len(log)
    fallback = False
    if best is None and table.feasible.any():
        # no feasible iterate was reached before the cap or the iteration limit
        feasible = np.flatnonzero(table.feasible)
        best = int(feasible[np.argmax(table.returns[feasible])])
        fallback = True
        if status != "max_iter":
            status = "capped"
        logger.warning(
            f"{table.game.name}: multiplier stopped at {lam:.4f} before reaching a feasible profile; "
            f"reporting the best feasible profile {'/'.join(table.label(best))}"
        )
    if best is None:
        last_g = log[-1].g if log else float(np.min(table.g))
        status = "infeasible"
        logger.info(f"{table.game.name}: no feasible profile exists (stopped after {iterations} iterations)")
        return (
            SaddleCertificate(
                pi_star=None,
                lambda_star=lam,
                g_value=last_g,
                kkt=kkt_check(lam, last_g, epsilon),
                deviation_checked=False,
                status=status,
                lambda_final=lam,
                iterations=iterations,
            ),
            log,
        )

    if fallback:
        lambda_star = lam
    else:
        center = switching if switching is not None else lam
        lo, hi = penalized_optimality_interval(table, best)
        lambda_star = min(max(center, max(lo, 0.0)), min(hi, lambda_max))
    g_best = float(table.g[best])
    kkt = kkt_check(lambda_star, g_best, epsilon)
    passed, witness = verify_smgne(table, best, tol=1e-9 if fallback else kkt.residual + 1e-9)
    certificate = SaddleCertificate(
        pi_star=best,
        lambda_star=lambda_star,
        g_value=g_best,
        kkt=kkt,
        deviation_checked=passed,
        status=status,
        lambda_final=lam,
        iterations=iterations,
        switching_lambda=switching,
        profile_label=table.label(best),
        witness=witness,
    )
    logger.info(
        f"{table.game.name}: {status} after {iterations} iterations, "
        f"profile {'/'.join(certificate.profile_label)} lambda*={lambda_star:.4f}"
    )
    return certificate, log


def table_evaluator(entries: Dict[Profile, Tuple[float, Sequence[float]]]) -> Evaluator:
    """Evaluator backed by an explicit payoff/workload table."""
    lookup = {tuple(int(x) for x in k): (float(r), list(w)) for k, (r, w) in entries.items()}

    def evaluate(profile: Profile) -> Tuple[float, Sequence[float]]:
        try:
            return lookup[tuple(profile)]
        except KeyError as exc:
            raise DomainError(f"no table entry for profile {profile}") from exc

    return evaluate


def scripted_sim_evaluator(env_config: EnvConfig, scripts: List[List[List[str]]], gamma: float = 0.99) -> Evaluator:
    """
    Evaluator playing per-agent scripted primitive plans on the rescue simulator.

    ``scripts[i][k]`` is agent i's k-th plan, a list of primitive names played
    cyclically. R is the discounted team return, w the terminal workload.
    """
    from . import sim_core

    def evaluate(profile: Profile) -> Tuple[float, Sequence[float]]:
        state = sim_core.reset(env_config, 0)
        total, discount = 0.0, 1.0
        while not state.done:
            actions = []
            for agent, plan_idx in enumerate(profile):
                plan = scripts[agent][plan_idx]
                actions.append(plan[state.t % len(plan)])
            outcome = sim_core.step(state, actions)
            total += discount * outcome.team_reward
            discount *= gamma
            state = outcome.next_state
        return total, list(state.workload)

    return evaluate


def random_finite_game(
    rng: np.random.Generator,
    n_agents: Optional[int] = None,
    n_policies: Optional[int] = None,
    tau: Optional[float] = None,
    max_work: int = 3,
) -> FiniteGame:
    """Random table game with up to 3 agents and 4 policies each."""
    n_agents = n_agents or int(rng.integers(2, 4))
    sizes = [n_policies or int(rng.integers(2, 5)) for _ in range(n_agents)]
    tau = tau if tau is not None else float(rng.uniform(0.55, 0.9))
    entries = {}
    for profile in itertools.product(*[range(s) for s in sizes]):
        entries[profile] = (float(rng.uniform(0.0, 1.0)), rng.integers(0, max_work + 1, size=n_agents).tolist())
    policy_sets = [[f"p{k}" for k in range(s)] for s in sizes]
    return FiniteGame(policy_sets=policy_sets, evaluator=table_evaluator(entries), tau=tau, name="random")
