"""Simulator for purifying a qubit through an auxiliary probe qubit."""
from .closed_dynamics import ModelParams, PurityTrace
from .purity_search import SearchSpec, SweepResult

__all__ = ["ModelParams", "PurityTrace", "SearchSpec", "SweepResult"]
__version__ = "0.1.0"
