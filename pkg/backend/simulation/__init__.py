"""
Simulation package for untangle

A mass-spring harness, scene loading and the shipped experiments.

Scenarios are registered by register_default_scenarios(); only the base
components are imported here.
"""

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.simulation.base import BaseScenario, ScenarioRegistry, scenario_registry
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.simulation.base import BaseScenario, ScenarioRegistry, scenario_registry

__all__ = [
    "BaseScenario",
    "ScenarioRegistry",
    "scenario_registry",
]
