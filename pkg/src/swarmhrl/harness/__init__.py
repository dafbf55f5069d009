"""Scenario generation, run I/O and the command-line entry point."""

from .scenario import ScenarioError, ScenarioSpec, bundled_scenarios, generate_scenario, load_scenario

__all__ = ["ScenarioError", "ScenarioSpec", "bundled_scenarios", "generate_scenario", "load_scenario"]
