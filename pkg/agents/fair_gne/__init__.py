"""
Fair-GNE Learner - Primal-dual training with an adaptive fairness multiplier.
"""

from .fair_gne import FairGNELearner
