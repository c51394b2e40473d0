"""
Base Scenario Module for untangle

This module defines the base class for shipped experiments and the registry
the CLI looks them up in. A scenario wraps one scene file and knows how to run
it (possibly several times with different settings) and summarize the outcome.
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.simulation.scene import SceneConfig, load_scene, shipped_scene_path
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.simulation.scene import SceneConfig, load_scene, shipped_scene_path

# Configure logging
logger = logging.getLogger("untangle.scenarios")


class BaseScenario(ABC):
    """
    Base class for all shipped experiments.

    Subclasses implement run(), which returns a JSON-serializable summary.
    """

    def __init__(self, name: str, description: str = None, scene_file: Optional[str] = None):
        """
        Initialize a new scenario.

        Args:
            name: Registry name of the scenario
            description: Optional one-line description
            scene_file: Scene JSON path (defaults to the shipped scene of the same name)
        """
        self.name = name
        self.description = description or f"{name} scenario"
        self.scene_file = scene_file or shipped_scene_path(name)

        logger.debug(f"Initialized {self.name} scenario from {self.scene_file}")

    def load_scene(self, **overrides: Any) -> SceneConfig:
        """
        Load the scene, optionally replacing top-level fields.

        Untangle settings can be overridden field by field with untangle={...}.
        """
        scene = load_scene(self.scene_file)
        untangle_overrides = overrides.pop("untangle", None)
        if untangle_overrides:
            overrides["untangle"] = scene.untangle.model_copy(update=untangle_overrides)
        return scene.model_copy(update=overrides) if overrides else scene

    @abstractmethod
    def run(self, output_dir: Optional[str] = None, **kwargs: Any) -> Dict[str, Any]:
        """
        Run the experiment.

        Args:
            output_dir: Where frames and reports go (nothing is written if None)

        Returns:
            Summary metrics
        """


class ScenarioRegistry:
    """
    Registry of shipped experiments.

    Single instance per process, shared by the CLI and tests.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(ScenarioRegistry, cls).__new__(cls)
            cls._instance.scenarios = {}
            cls._instance.logger = logging.getLogger("untangle.scenario_registry")
        return cls._instance

    def register(self, scenario: BaseScenario) -> None:
        """
        Register a scenario with the registry.

        Args:
            scenario: The scenario to register
        """
        if scenario.name in self.scenarios:
            self.logger.warning(f"Scenario '{scenario.name}' already registered. Overwriting.")

        self.scenarios[scenario.name] = scenario
        self.logger.debug(f"Registered scenario '{scenario.name}'")

    def get(self, name: str) -> Optional[BaseScenario]:
        """
        Get a scenario by name.

        Args:
            name: The name of the scenario to retrieve

        Returns:
            The scenario if found, None otherwise
        """
        scenario = self.scenarios.get(name)
        if scenario is None:
            self.logger.warning(f"Scenario '{name}' not found in registry")
        return scenario

    def list_scenarios(self) -> List[str]:
        return sorted(self.scenarios)


# Create a global scenario registry instance
scenario_registry = ScenarioRegistry()
