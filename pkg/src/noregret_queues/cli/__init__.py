"""Scenario files, multi-seed orchestration and the command-line interface."""
from .config import ScenarioConfig, config_from_dict, list_scenarios, load_config
from .main import main
from .run import run_scenario

__all__ = ["ScenarioConfig", "config_from_dict", "list_scenarios", "load_config", "main", "run_scenario"]
