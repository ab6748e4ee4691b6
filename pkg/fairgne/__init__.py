"""
Fair-GNE - Fairness-constrained cooperative multi-agent learning with an
adaptive Lagrange multiplier, plus an exact solver for finite constrained games.
"""

__version__ = "0.1.0"
