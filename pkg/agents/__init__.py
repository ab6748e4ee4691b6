"""
Penalty learners, one sub-package each, keyed by the penalty mode they train on.
"""

from typing import Dict, Type

from fairgne.base_learner import BaseLearner, TrainReport
from fairgne.config import EnvConfig, TrainConfig

from .fair_gne import FairGNELearner
from .fixed_penalty import FixedPenaltyLearner
from .unconstrained import UnconstrainedLearner

LEARNERS: Dict[str, Type[BaseLearner]] = {
    "none": UnconstrainedLearner,
    "fixed": FixedPenaltyLearner,
    "fair_gne": FairGNELearner,
}


def build_learner(env_config: EnvConfig, train_config: TrainConfig) -> BaseLearner:
    """Instantiate the learner matching ``train_config.penalty.mode``."""
    return LEARNERS[train_config.penalty.mode]({"env": env_config, "train": train_config})


def train(env_config: EnvConfig, train_config: TrainConfig) -> TrainReport:
    """Train one learner and return its report."""
    return build_learner(env_config, train_config).train()
