"""Multiverse analysis of fairness-relevant design decisions.

The package enumerates a grid of pipeline design decisions, trains one model
per grid cell, evaluates group fairness under a second grid of evaluation
decisions, and attributes the variance of the resulting metric distribution
back to individual decisions and their interactions.
"""

__version__ = "0.1.0"
