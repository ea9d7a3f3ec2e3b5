"""Simulation engines, random streams and the run loop."""
from .engines import DualState, StandardState, StepOutcome, step_dual, step_no_priority, step_standard
from .runner import MODELS, RegretRow, RunTrace, run_coupled, simulate
from .streams import BernoulliStream, role_rng

__all__ = [
    "BernoulliStream", "DualState", "MODELS", "RegretRow", "RunTrace", "StandardState",
    "StepOutcome", "role_rng", "run_coupled", "simulate", "step_dual", "step_no_priority",
    "step_standard",
]
