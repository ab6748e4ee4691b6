"""
Fixed Penalty Learner - Trains on the team reward minus a constant-weight unfairness penalty.
"""

from .fixed_penalty import FixedPenaltyLearner
