"""Decentralized queues that pick servers with no-regret learners.

Simulation engines for the priority, deferred-decision and no-priority
models, a randomized central matching scheduler, per-queue bandit learners,
windowed regret auditing, stability classification and a window-length
calculator.
"""
from .errors import *  # noqa: F401,F403
from .model import SlackReport, SystemSpec, check_feasibility, max_slack, preprocess

__version__ = "0.1.0"
