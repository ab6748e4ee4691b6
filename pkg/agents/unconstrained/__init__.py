"""
Unconstrained Learner - Trains on the raw team reward with no fairness term.
"""

from .unconstrained import UnconstrainedLearner
