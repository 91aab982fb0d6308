"""Trajectory and rate planning for a UAV relay bridging an FSO hop and an RF hop."""
from .baselines import data_ferry, static_relay
from .channel import link_models
from .planner import DELAY_LIMITED, DELAY_TOLERANT, optimize
from .queue import RatePlan, evolve_queue, greedy_rates
from .scenario import ConfigError, ScenarioParams, Trajectory, load_preset, load_scenario

__all__ = [
    "ConfigError", "DELAY_LIMITED", "DELAY_TOLERANT", "RatePlan", "ScenarioParams", "Trajectory",
    "data_ferry", "evolve_queue", "greedy_rates", "link_models", "load_preset", "load_scenario",
    "optimize", "static_relay",
]
