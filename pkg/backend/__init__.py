"""
untangle Backend Package

This package contains the components of the untangle system:
- app: settings, pydantic models, phase timing and the command-line front end
- geometry: meshes, collision detection, stencils, response, diffusion and the untangle loop
- simulation: scene loading, the dynamics harness and the shipped experiments

Note: Only the base components are imported here. Scenarios are registered by
simulation.scenarios.register_default_scenarios().
"""

# Import key components for easier access
try:
    # Try importing with the full package path (for local development)
    from untangle.backend.geometry import TriangleMesh, UntangleError, untangle
    from untangle.backend.simulation import BaseScenario, ScenarioRegistry, scenario_registry
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.geometry import TriangleMesh, UntangleError, untangle
    from backend.simulation import BaseScenario, ScenarioRegistry, scenario_registry

__all__ = [
    "TriangleMesh",
    "UntangleError",
    "untangle",
    "BaseScenario",
    "ScenarioRegistry",
    "scenario_registry",
]
