"""
Configuration objects and YAML loading.

Every object is built from a plain ``Dict[str, Any]`` through ``from_dict`` and
checked by ``validate()``; unknown keys are rejected so typos surface early.
"""

import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Sequence, Union

import yaml

from .errors import ConfigurationError

CADENCE_PRESETS: Dict[str, Dict[str, Any]] = {
    # the multiplier moves at every environment step on the statewise violation
    "main-text": {
        "eta_lambda": 0.01,
        "update_unit": "step",
        "update_period": 1,
        "g_source": "statewise",
    },
    # slow dual timescale driven by Monte Carlo estimates of the discounted violation
    "appendix": {
        "eta_lambda": 5e-4,
        "update_unit": "step",
        "update_period": 5000,
        "g_source": "monte_carlo",
        "rollouts": 1,
    },
    "episodic": {
        "eta_lambda": 0.01,
        "update_unit": "episode",
        "update_period": 1,
        "g_source": "episode",
    },
}

SKILL_PRESETS = ("heterogeneous", "uniform", "custom")
ENV_KINDS = ("rescue_breath", "chore")
BACKBONES = ("auto", "centralized_joint", "independent_per_agent")
PENALTY_MODES = ("none", "fixed", "fair_gne")


def _check_keys(name: str, data: Dict[str, Any], allowed: Sequence[str]):
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigurationError(f"unknown {name} keys: {', '.join(unknown)}")


def _build(cls, name: str, data: Optional[Dict[str, Any]], aliases: Optional[Dict[str, str]] = None):
    data = dict(data or {})
    for alias, target in (aliases or {}).items():
        if alias in data:
            data[target] = data.pop(alias)
    _check_keys(name, data, [f.name for f in fields(cls)])
    try:
        obj = cls(**data)
    except TypeError as exc:
        raise ConfigurationError(f"invalid {name} section: {exc}") from exc
    obj.validate()
    return obj


@dataclass
class EnvConfig:
    """Environment settings (rescue-breath simulator or chore game)."""

    kind: str = "rescue_breath"
    n_agents: int = 3
    c_required: int = 3
    b_required: int = 2
    horizon: int = 50
    energy_max: int = 2
    energy_enabled: bool = True
    skill_preset: str = "heterogeneous"
    skills: Optional[List[List[bool]]] = None
    start_stations: Optional[List[str]] = None
    action_failure_prob: float = 0.0
    observe_energy: bool = True
    observe_workload: bool = False
    work_value: float = 1.0
    work_cost: float = 0.1

    ALIASES = {"n": "n_agents", "C_required": "c_required", "B_required": "b_required"}

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]] = None) -> "EnvConfig":
        return _build(cls, "env", data, cls.ALIASES)

    def validate(self):
        if self.kind not in ENV_KINDS:
            raise ConfigurationError(f"env kind must be one of {ENV_KINDS}, got {self.kind!r}")
        if self.n_agents < 2:
            raise ConfigurationError(f"at least two agents are required, got n={self.n_agents}")
        if self.horizon < 1:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if self.c_required < 1 or self.b_required < 1:
            raise ConfigurationError("C_required and B_required must both be at least 1")
        if self.energy_max < 1:
            raise ConfigurationError(f"energy_max must be positive, got {self.energy_max}")
        if not 0.0 <= self.action_failure_prob < 1.0:
            raise ConfigurationError("action_failure_prob must lie in [0, 1)")
        if self.skill_preset not in SKILL_PRESETS:
            raise ConfigurationError(f"skill_preset must be one of {SKILL_PRESETS}")
        if self.skill_preset == "custom":
            if not self.skills or len(self.skills) != self.n_agents:
                raise ConfigurationError("custom skill preset needs one [setup, treatment] pair per agent")
        if self.start_stations is not None and len(self.start_stations) != self.n_agents:
            raise ConfigurationError("start_stations must list one station per agent")
        if self.kind == "chore" and self.n_agents != 2:
            raise ConfigurationError("the chore game is defined for exactly two agents")
        return self

    @property
    def stochastic(self) -> bool:
        return self.action_failure_prob > 0.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class DualConfig:
    """Settings of the adaptive multiplier."""

    tau: float = 0.85
    eta_lambda: float = 0.01
    lambda_max: float = 20.0
    lambda_init: float = 0.0
    update_unit: str = "step"
    update_period: int = 1
    g_source: str = "statewise"
    rollouts: int = 1
    clamp_penalty: bool = False
    history_stride: Optional[int] = None
    epsilon_kkt: float = 0.05

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]] = None, cadence: Optional[str] = None) -> "DualConfig":
        merged: Dict[str, Any] = {}
        if cadence is not None:
            if cadence not in CADENCE_PRESETS:
                raise ConfigurationError(f"unknown cadence preset {cadence!r}; choose from {sorted(CADENCE_PRESETS)}")
            merged.update(CADENCE_PRESETS[cadence])
        merged.update(data or {})
        return _build(cls, "dual", merged)

    def validate(self):
        if not 0.0 < self.tau < 1.0:
            raise ConfigurationError(f"tau must lie in (0, 1), got {self.tau}")
        if self.eta_lambda < 0.0:
            raise ConfigurationError("eta_lambda must be non-negative")
        if self.lambda_max <= 0.0:
            raise ConfigurationError("lambda_max must be positive")
        if not 0.0 <= self.lambda_init <= self.lambda_max:
            raise ConfigurationError("lambda_init must lie in [0, lambda_max]")
        if self.update_unit not in ("step", "episode"):
            raise ConfigurationError("update_unit must be 'step' or 'episode'")
        if self.update_period < 1:
            raise ConfigurationError("update_period must be at least 1")
        if self.g_source not in ("statewise", "episode", "monte_carlo"):
            raise ConfigurationError("g_source must be statewise, episode or monte_carlo")
        if self.g_source == "statewise" and self.update_unit != "step":
            raise ConfigurationError("statewise violations require update_unit 'step'")
        if self.g_source == "episode" and self.update_unit != "episode":
            raise ConfigurationError("episode violations require update_unit 'episode'")
        if self.rollouts < 1:
            raise ConfigurationError("rollouts must be at least 1")
        if self.epsilon_kkt <= 0.0:
            raise ConfigurationError("epsilon_kkt must be positive")
        return self


@dataclass
class PenaltyConfig:
    """Which penalty the learner trains on: none, fixed, or the adaptive multiplier."""

    mode: str = "none"
    lambda_fixed: float = 0.0
    index: str = "gini"
    tau: float = 0.85
    dual: Optional[DualConfig] = None

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]] = None, cadence: Optional[str] = None) -> "PenaltyConfig":
        data = dict(data or {})
        dual_data = data.pop("dual", None)
        _check_keys("penalty", data, [f.name for f in fields(cls) if f.name != "dual"])
        penalty = cls(**data)
        if penalty.mode == "fair_gne":
            dual_data = dict(dual_data or {})
            dual_data.setdefault("tau", penalty.tau)
            penalty.dual = DualConfig.from_dict(dual_data, cadence=cadence)
            penalty.tau = penalty.dual.tau
        return penalty.validate()

    @classmethod
    def parse(cls, spec: Union[str, Dict[str, Any]], cadence: Optional[str] = None) -> "PenaltyConfig":
        """
        Parse a method spec: ``none``, ``gini:<lambda>``, ``jfi:<lambda>[@<tau>]``,
        ``fair_gne:<tau>`` or a mapping.
        """
        if isinstance(spec, dict):
            return cls.from_dict(spec, cadence=cadence)
        text = str(spec).strip()
        head, _, arg = text.partition(":")
        try:
            if head == "none":
                return cls.from_dict({"mode": "none"})
            if head in ("gini", "jfi"):
                value, _, tau = arg.partition("@")
                data: Dict[str, Any] = {"mode": "fixed", "index": head, "lambda_fixed": float(value)}
                if tau:
                    data["tau"] = float(tau)
                return cls.from_dict(data)
            if head == "fair_gne":
                return cls.from_dict({"mode": "fair_gne", "tau": float(arg)}, cadence=cadence)
        except ValueError as exc:
            raise ConfigurationError(f"malformed method spec {text!r}: {exc}") from exc
        raise ConfigurationError(f"unknown method spec {text!r}")

    def validate(self):
        if self.mode not in PENALTY_MODES:
            raise ConfigurationError(f"penalty mode must be one of {PENALTY_MODES}, got {self.mode!r}")
        if self.lambda_fixed < 0.0:
            raise ConfigurationError("fixed penalty weights must be non-negative")
        if self.index not in ("gini", "jfi"):
            raise ConfigurationError("fixed penalty index must be 'gini' or 'jfi'")
        if not 0.0 < self.tau < 1.0:
            raise ConfigurationError(f"tau must lie in (0, 1), got {self.tau}")
        if self.mode == "fair_gne" and self.dual is None:
            raise ConfigurationError("fair_gne penalty needs a dual section")
        return self

    @property
    def label(self) -> str:
        if self.mode == "none":
            return "No fairness"
        if self.mode == "fixed":
            name = "Gini index" if self.index == "gini" else "JFI penalty"
            return f"{name} (lambda={self.lambda_fixed:g})"
        return f"Fair-GNE (tau={self.tau:g})"

    @property
    def slug(self) -> str:
        if self.mode == "none":
            return "none"
        if self.mode == "fixed":
            return f"{self.index}_{self.lambda_fixed:g}"
        return f"fair_gne_{self.tau:g}"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class TrainConfig:
    """Learner settings for one training run."""

    episodes: int = 20000
    gamma: float = 0.99
    alpha: float = 0.1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.6
    backbone: str = "auto"
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    eval_every: int = 500
    eval_episodes: int = 50
    eval_tau: float = 0.85
    select_policy: str = "best_feasible"
    seed: int = 0

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]] = None, cadence: Optional[str] = None) -> "TrainConfig":
        data = dict(data or {})
        penalty = data.pop("penalty", None)
        _check_keys("train", data, [f.name for f in fields(cls) if f.name != "penalty"])
        config = cls(**data)
        if penalty is not None:
            config.penalty = penalty if isinstance(penalty, PenaltyConfig) else PenaltyConfig.parse(penalty, cadence)
        return config.validate()

    def validate(self):
        if self.episodes < 1:
            raise ConfigurationError("episodes must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError("gamma must lie in (0, 1)")
        if self.alpha <= 0.0:
            raise ConfigurationError("alpha must be positive")
        for eps in (self.epsilon_start, self.epsilon_end):
            if not 0.0 <= eps <= 1.0:
                raise ConfigurationError("epsilon values must lie in [0, 1]")
        if not 0.0 < self.epsilon_decay_fraction <= 1.0:
            raise ConfigurationError("epsilon_decay_fraction must lie in (0, 1]")
        if self.backbone not in BACKBONES:
            raise ConfigurationError(f"backbone must be one of {BACKBONES}")
        if self.eval_every < 1 or self.eval_episodes < 1:
            raise ConfigurationError("eval_every and eval_episodes must be positive")
        if not 0.0 < self.eval_tau < 1.0:
            raise ConfigurationError("eval_tau must lie in (0, 1)")
        if self.select_policy not in ("best_feasible", "final"):
            raise ConfigurationError("select_policy must be 'best_feasible' or 'final'")
        return self

    @property
    def tau(self) -> float:
        """Threshold used for constraint metrics at evaluation time."""
        return self.penalty.tau if self.penalty.mode == "fair_gne" else self.eval_tau

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=seed)

    def with_penalty(self, penalty: PenaltyConfig) -> "TrainConfig":
        return replace(self, penalty=penalty)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


DEFAULT_METHODS = ["gini:0", "gini:10", "gini:50", "fair_gne:0.85", "fair_gne:0.75", "fair_gne:0.65", "fair_gne:0.55"]


@dataclass
class ExperimentConfig:
    """A full method x seed grid."""

    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    methods: List[PenaltyConfig] = field(default_factory=list)
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2])
    output_dir: str = "results"
    cadence: str = "main-text"
    workers: Optional[int] = None
    alpha: float = 0.05
    dump_traces: bool = True

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        data = dict(data or {})
        _check_keys(
            "experiment",
            data,
            ["env", "train", "dual", "methods", "seeds", "output_dir", "cadence", "workers", "alpha", "dump_traces"],
        )
        cadence = data.get("cadence", "main-text")
        if cadence not in CADENCE_PRESETS:
            raise ConfigurationError(f"unknown cadence preset {cadence!r}")
        dual_overrides = data.get("dual") or {}
        methods = []
        for spec in data.get("methods") or DEFAULT_METHODS:
            method = PenaltyConfig.parse(spec, cadence=cadence)
            if method.mode == "fair_gne" and dual_overrides:
                merged = {**dual_overrides, "tau": method.tau}
                method.dual = DualConfig.from_dict(merged, cadence=cadence)
            methods.append(method)
        config = cls(
            env=EnvConfig.from_dict(data.get("env")),
            train=TrainConfig.from_dict(data.get("train")),
            methods=methods,
            seeds=[int(s) for s in data.get("seeds", [0, 1, 2])],
            output_dir=str(data.get("output_dir", "results")),
            cadence=cadence,
            workers=data.get("workers"),
            alpha=float(data.get("alpha", 0.05)),
            dump_traces=bool(data.get("dump_traces", True)),
        )
        return config.validate()

    @classmethod
    def from_yaml(cls, path: str) -> "ExperimentConfig":
        return cls.from_dict(load_yaml(path))

    def validate(self):
        if not self.methods:
            raise ConfigurationError("the method grid must not be empty")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        if self.workers is not None and self.workers < 1:
            raise ConfigurationError("workers must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError("alpha must lie in (0, 1)")
        slugs = [m.slug for m in self.methods]
        if len(set(slugs)) != len(slugs):
            raise ConfigurationError(f"duplicate methods in grid: {slugs}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "env": self.env.to_dict(),
            "train": self.train.to_dict(),
            "methods": [m.to_dict() for m in self.methods],
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
            "cadence": self.cadence,
            "workers": self.workers,
            "alpha": self.alpha,
            "dump_traces": self.dump_traces,
        }


def load_yaml(path: str) -> Dict[str, Any]:
    """Read a YAML mapping, raising ConfigurationError on any problem."""
    if not os.path.exists(path):
        raise ConfigurationError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must contain a mapping at top level")
    return data
