"""
Symbolic rescue-breath resuscitation simulator.

Three (by default) agents move around a fixed ring of six stations, fetch the
backboard and the bag-valve mask, assess the patient, compress the chest and
give rescue breaths. The team reward is the increment of an integer milestone
potential H, and every increment is credited to the agent whose action caused
it, which yields the workload counters the fairness constraint is defined on.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Dict, Hashable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .config import EnvConfig
from .environment import MultiAgentEnv, StepOutcome
from .errors import ConfigurationError, InterfaceError, LifecycleError
from .fairness import jain_index

logger = logging.getLogger("fairgne.sim")


class Station(str, Enum):
    CART_LEFT = "cart_left"
    CART_RIGHT = "cart_right"
    TABLE = "table"
    CART_SMALL = "cart_small"
    PATIENT_LEGS = "patient_legs"
    BED = "bed"


# movement topology: ``move`` advances one position clockwise
RING: Tuple[Station, ...] = tuple(Station)
_RING_INDEX = {station: idx for idx, station in enumerate(RING)}


class Item(str, Enum):
    BACKBOARD = "backboard"
    BVM = "bvm"


ITEMS: Tuple[Item, ...] = tuple(Item)
_ITEM_INDEX = {item: idx for idx, item in enumerate(ITEMS)}


class ActionPrimitive(IntEnum):
    MOVE = 0
    PICK = 1
    PLACE = 2
    STACK = 3
    TREAT = 4
    COMPRESS_CHEST = 5
    GIVE_RESCUE_BREATHS = 6
    NOOP = 7

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def coerce(cls, value: Union["ActionPrimitive", int, str]) -> "ActionPrimitive":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError as exc:
                raise InterfaceError(f"unknown action primitive {value!r}") from exc
        try:
            return cls(int(value))
        except ValueError as exc:
            raise InterfaceError(f"unknown action primitive {value!r}") from exc


N_PRIMITIVES = len(ActionPrimitive)

SETUP_ACTIONS = frozenset({ActionPrimitive.PICK, ActionPrimitive.PLACE, ActionPrimitive.STACK})
TREATMENT_ACTIONS = frozenset(
    {ActionPrimitive.TREAT, ActionPrimitive.COMPRESS_CHEST, ActionPrimitive.GIVE_RESCUE_BREATHS}
)


@dataclass
class AgentState:
    station: Station
    held: Optional[Item] = None
    energy: int = 0
    skill_setup: bool = True
    skill_treatment: bool = True

    def can(self, action: ActionPrimitive) -> bool:
        if action in SETUP_ACTIONS:
            return self.skill_setup
        if action in TREATMENT_ACTIONS:
            return self.skill_treatment
        return True


@dataclass
class SimState:
    """
    Joint symbolic state.

    ``item_locations`` maps an item to the station it rests on, or ``None``
    while it is held or (for the backboard) placed under the patient.
    """

    agents: List[AgentState]
    item_locations: Dict[Item, Optional[Station]]
    backboard_placed: bool = False
    patient_assessed: bool = False
    compressions_done: int = 0
    breaths_done: int = 0
    backboard_held_once: bool = False
    bvm_held_once: bool = False
    t: int = 0
    workload: List[int] = field(default_factory=list)
    done: bool = False
    config: EnvConfig = field(default_factory=EnvConfig, compare=False, repr=False)
    rng: Optional[np.random.Generator] = field(default=None, compare=False, repr=False)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def clone(self) -> "SimState":
        return replace(
            self,
            agents=[replace(agent) for agent in self.agents],
            item_locations=dict(self.item_locations),
            workload=list(self.workload),
        )


def skills_for(config: EnvConfig) -> List[Tuple[bool, bool]]:
    """(setup, treatment) capability flags per agent."""
    if config.skill_preset == "uniform":
        return [(True, True)] * config.n_agents
    if config.skill_preset == "custom":
        return [(bool(s[0]), bool(s[1])) for s in config.skills]
    # heterogeneous: agent 0 can only set up, the others can do everything
    return [(True, False)] + [(True, True)] * (config.n_agents - 1)


def _start_stations(config: EnvConfig) -> List[Station]:
    if config.start_stations is None:
        return [RING[i % len(RING)] for i in range(config.n_agents)]
    try:
        return [Station(name) for name in config.start_stations]
    except ValueError as exc:
        raise ConfigurationError(f"unknown start station in {config.start_stations}") from exc


def max_potential(config: EnvConfig) -> int:
    return 4 + config.c_required + config.b_required


def reset(config: EnvConfig, seed: int = 0) -> SimState:
    """
    Build the initial state: agents at their start stations with empty hands
    and full energy, backboard on the left cart, BVM on the right cart.
    """
    if not isinstance(config, EnvConfig):
        config = EnvConfig.from_dict(config)
    config.validate()
    agents = [
        AgentState(station=station, held=None, energy=config.energy_max, skill_setup=setup, skill_treatment=treat)
        for station, (setup, treat) in zip(_start_stations(config), skills_for(config))
    ]
    return SimState(
        agents=agents,
        item_locations={Item.BACKBOARD: Station.CART_LEFT, Item.BVM: Station.CART_RIGHT},
        workload=[0] * config.n_agents,
        config=config,
        rng=np.random.default_rng(seed),
    )


def milestone_potential(state: SimState) -> int:
    """Integer task progress H: one unit per milestone, compression and breath."""
    return (
        int(state.patient_assessed)
        + int(state.backboard_held_once)
        + int(state.backboard_placed)
        + state.compressions_done
        + int(state.bvm_held_once)
        + state.breaths_done
    )


def _check_agent(state: SimState, agent: int):
    if not 0 <= agent < state.n_agents:
        raise InterfaceError(f"agent index {agent} out of range for {state.n_agents} agents")


def legal_actions(state: SimState, agent: int) -> Set[ActionPrimitive]:
    """Primitives whose preconditions hold for ``agent`` in ``state``."""
    _check_agent(state, agent)
    config = state.config
    ag = state.agents[agent]
    at_bed = ag.station == Station.BED
    legal = {ActionPrimitive.MOVE, ActionPrimitive.NOOP}
    if ag.skill_setup:
        if ag.held is None and any(loc == ag.station for loc in state.item_locations.values()):
            legal.add(ActionPrimitive.PICK)
        if ag.held is not None:
            legal.add(ActionPrimitive.PLACE)
        if ag.held == Item.BACKBOARD and at_bed and not state.backboard_placed:
            legal.add(ActionPrimitive.STACK)
    if ag.skill_treatment and at_bed:
        if not state.patient_assessed:
            legal.add(ActionPrimitive.TREAT)
        has_energy = ag.energy >= 1 or not config.energy_enabled
        if state.backboard_placed and state.compressions_done < config.c_required and has_energy:
            legal.add(ActionPrimitive.COMPRESS_CHEST)
        if (
            ag.held == Item.BVM
            and state.compressions_done == config.c_required
            and state.breaths_done < config.b_required
        ):
            legal.add(ActionPrimitive.GIVE_RESCUE_BREATHS)
    return legal


def step(state: SimState, joint_action: Sequence[Union[ActionPrimitive, int, str]]) -> StepOutcome:
    """
    Resolve one joint action.

    Preconditions are checked against the pre-step state; contested resources
    (an item, the single assessment, the remaining compressions or breaths)
    go to the lowest agent index and the losers resolve as noop.
    """
    if state.done:
        raise LifecycleError("cannot step an episode that is already done")
    if len(joint_action) != state.n_agents:
        raise InterfaceError(f"expected {state.n_agents} actions, got {len(joint_action)}")
    config = state.config
    if state.t >= config.horizon:
        raise LifecycleError("episode horizon already reached")
    actions = [ActionPrimitive.coerce(a) for a in joint_action]

    failed = [False] * state.n_agents
    if config.stochastic:
        draws = state.rng.random(state.n_agents)
        failed = [bool(d < config.action_failure_prob) for d in draws]

    nxt = state.clone()
    delta = [0] * state.n_agents
    effective = [ActionPrimitive.NOOP] * state.n_agents
    compressing = [False] * state.n_agents
    claimed_items: Set[Item] = set()
    assess_taken = False
    compress_slots = config.c_required - state.compressions_done
    breath_slots = config.b_required - state.breaths_done

    for i, action in enumerate(actions):
        ag = state.agents[i]
        if failed[i] or not ag.can(action):
            continue
        new = nxt.agents[i]
        at_bed = ag.station == Station.BED
        if action == ActionPrimitive.MOVE:
            new.station = RING[(_RING_INDEX[ag.station] + 1) % len(RING)]
        elif action == ActionPrimitive.PICK:
            if ag.held is not None:
                continue
            item = next(
                (it for it in ITEMS if state.item_locations[it] == ag.station and it not in claimed_items), None
            )
            if item is None:
                continue
            claimed_items.add(item)
            new.held = item
            nxt.item_locations[item] = None
            if item == Item.BACKBOARD and not state.backboard_held_once:
                nxt.backboard_held_once = True
                delta[i] = 1
            elif item == Item.BVM and not state.bvm_held_once:
                nxt.bvm_held_once = True
                delta[i] = 1
        elif action == ActionPrimitive.PLACE:
            if ag.held is None:
                continue
            nxt.item_locations[ag.held] = ag.station
            new.held = None
        elif action == ActionPrimitive.STACK:
            if ag.held != Item.BACKBOARD or not at_bed or state.backboard_placed:
                continue
            nxt.backboard_placed = True
            new.held = None
            delta[i] = 1
        elif action == ActionPrimitive.TREAT:
            if not at_bed or state.patient_assessed or assess_taken:
                continue
            assess_taken = True
            nxt.patient_assessed = True
            delta[i] = 1
        elif action == ActionPrimitive.COMPRESS_CHEST:
            if not at_bed or not state.backboard_placed or compress_slots <= 0:
                continue
            if config.energy_enabled:
                if ag.energy < 1:
                    continue
                new.energy = ag.energy - 1
            compress_slots -= 1
            compressing[i] = True
            nxt.compressions_done += 1
            delta[i] = 1
        elif action == ActionPrimitive.GIVE_RESCUE_BREATHS:
            if not at_bed or ag.held != Item.BVM or state.compressions_done != config.c_required or breath_slots <= 0:
                continue
            breath_slots -= 1
            nxt.breaths_done += 1
            delta[i] = 1
        effective[i] = action

    if config.energy_enabled:
        for i, new in enumerate(nxt.agents):
            if not compressing[i]:
                new.energy = min(config.energy_max, new.energy + 1)

    nxt.t = state.t + 1
    nxt.workload = [w + d for w, d in zip(state.workload, delta)]
    potential = milestone_potential(nxt)
    team_reward = float(potential - milestone_potential(state))
    success = potential == max_potential(config)
    nxt.done = success or nxt.t >= config.horizon
    return StepOutcome(
        next_state=nxt,
        team_reward=team_reward,
        workload_delta=delta,
        done=nxt.done,
        success=success,
        fairness_value=jain_index(nxt.workload),
        info={"effective_actions": effective},
    )


def encode_state_key(state: SimState) -> Hashable:
    """
    Canonical tabular key.

    Covers stations, held items, item locations and the task flags and
    counters; energies are included when ``observe_energy`` is set and the
    workload vector when ``observe_workload`` is set. ``t`` never is.
    """
    agents = tuple(
        (_RING_INDEX[a.station], -1 if a.held is None else _ITEM_INDEX[a.held]) for a in state.agents
    )
    items = tuple(
        -1 if state.item_locations[it] is None else _RING_INDEX[state.item_locations[it]] for it in ITEMS
    )
    key = (
        agents,
        items,
        state.backboard_placed,
        state.patient_assessed,
        state.compressions_done,
        state.breaths_done,
        state.backboard_held_once,
        state.bvm_held_once,
    )
    config = state.config
    if config.observe_energy and config.energy_enabled:
        key = key + (tuple(a.energy for a in state.agents),)
    if config.observe_workload:
        key = key + (tuple(state.workload),)
    return key


class RescueBreathSim(MultiAgentEnv):
    """
    Stateful wrapper over the functional simulator for the learners.
    """

    def __init__(self, config: Optional[EnvConfig] = None):
        self.config = (config or EnvConfig()).validate()
        self.n_agents = self.config.n_agents
        self.n_actions = N_PRIMITIVES
        self.noop_action = int(ActionPrimitive.NOOP)
        self.horizon = self.config.horizon
        self.max_potential = max_potential(self.config)
        self.state: Optional[SimState] = None

    def reset(self, seed: int = 0) -> SimState:
        self.state = reset(self.config, seed)
        logger.debug(f"reset rescue-breath episode with seed {seed}")
        return self.state

    def step(self, joint_action: Sequence[Union[ActionPrimitive, int, str]]) -> StepOutcome:
        if self.state is None:
            raise LifecycleError("reset() must be called before step()")
        outcome = step(self.state, joint_action)
        self.state = outcome.next_state
        return outcome

    def state_key(self, state: SimState) -> Hashable:
        return encode_state_key(state)

    def workload(self, state: SimState) -> List[int]:
        return list(state.workload)

    def stations(self, state: SimState) -> List[str]:
        return [a.station.value for a in state.agents]

    def potential(self, state: SimState) -> int:
        return milestone_potential(state)

    def legal_actions(self, agent: int) -> Set[ActionPrimitive]:
        return legal_actions(self.state, agent)

    def action_label(self, action: int) -> str:
        return ActionPrimitive.coerce(action).label
