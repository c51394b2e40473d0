"""
Scenarios Module for untangle

The shipped experiments:

* spike_sheet: a sheet falls onto a kinematic spike with collision response
  switched off, then on; the existing penetration must be repaired and stay
  repaired.
* two_tori: a weightless pressurized torus hits a free one at rest; sweeping
  the post-response distance moves the collision from inelastic to elastic.
* interval_sweep: a sheet drapes over a sphere with collisions handled every
  step and once every eight steps.
"""

import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.app.models import FrameRecord, ScenarioResult
    from untangle.backend.simulation.base import BaseScenario
    from untangle.backend.simulation.dynamics import run_scenario
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.app.models import FrameRecord, ScenarioResult
    from backend.simulation.base import BaseScenario
    from backend.simulation.dynamics import run_scenario

# Configure logging
logger = logging.getLogger("untangle.scenarios")


def _subdir(output_dir: Optional[str], name: str) -> Optional[str]:
    return f"{output_dir}/{name}" if output_dir else None


class SpikeSheetScenario(BaseScenario):
    """Repair of a penetration that already exists when response switches on."""

    def __init__(self, scene_file: Optional[str] = None):
        super().__init__(
            name="spike_sheet",
            description="Sheet pierced by a kinematic spike before collision response is enabled",
            scene_file=scene_file,
        )

    @staticmethod
    def summarize(result: ScenarioResult, collision_start_step: int) -> Dict[str, Any]:
        """
        Frame of response activation, first clean frame after it and any relapse.

        Returns:
            response_frame, clean_frame (first frame from response_frame on with
            zero crossings, None if there is none), frames_to_clean,
            relapse_frames (later frames with crossings again), stays_clean and
            the per-frame crossing counts
        """
        crossings = result.crossing_counts()
        response_frame = next((f.index for f in result.frames if f.step >= collision_start_step), None)
        clean_frame = None
        if response_frame is not None:
            clean_frame = next((i for i in range(response_frame, len(crossings)) if crossings[i] == 0), None)
        relapse_frames = [] if clean_frame is None else [i for i in range(clean_frame, len(crossings)) if crossings[i]]
        return {
            "response_frame": response_frame,
            "clean_frame": clean_frame,
            "frames_to_clean": None if clean_frame is None else clean_frame - response_frame,
            "relapse_frames": relapse_frames,
            "stays_clean": clean_frame is not None and not relapse_frames,
            "penetrated_before_response": any(crossings[:response_frame or 0]),
            "crossings": crossings,
            "illegal_vertices": result.illegal_counts(),
        }

    def run(self, output_dir: Optional[str] = None, **overrides: Any) -> Dict[str, Any]:
        scene = self.load_scene(**overrides)
        result = run_scenario(scene, output_dir)
        metrics = result.metrics = self.summarize(result, scene.collision_start_step)
        logger.info(
            f"spike_sheet: clean from frame {metrics['clean_frame']} (response at {metrics['response_frame']}), "
            f"{len(metrics['relapse_frames'])} relapses"
        )
        if metrics["relapse_frames"]:
            logger.warning(f"spike_sheet: crossings returned in frames {metrics['relapse_frames']}")
        return {"scenario": self.name, **metrics}


class TwoToriScenario(BaseScenario):
    """Elasticity sweep over the post-response distance."""

    moving_mesh = "moving"
    resting_mesh = "resting"

    def __init__(self, scene_file: Optional[str] = None, window: int = 20):
        super().__init__(
            name="two_tori",
            description="Weightless pressurized torus colliding with a free, initially resting one",
            scene_file=scene_file,
        )
        self.window = window

    def rebound(self, result: ScenarioResult) -> Optional[float]:
        """
        Growth of the separation between the tori over the `window` frames that
        follow first contact.

        Contact is the first untangle call that found crossings; separation is
        measured along the centroid offset between the tori at the contact frame.
        """
        contact_step = next((call.step for call in result.untangle_calls if call.initial_intersections > 0), None)
        if contact_step is None:
            return None
        contact = next((f for f in result.frames if f.step >= contact_step), None)
        if contact is None:
            return None
        later = result.frames[min(contact.index + self.window, len(result.frames) - 1)]

        def offset(frame: FrameRecord) -> np.ndarray:
            return np.asarray(frame.centroids[self.moving_mesh]) - np.asarray(frame.centroids[self.resting_mesh])

        direction = offset(contact)
        norm = float(np.linalg.norm(direction))
        if norm == 0.0:
            return None
        return float((offset(later) - direction) @ (direction / norm))

    def run(self, output_dir: Optional[str] = None, post_distances: Sequence[float] = (0.0, 0.005, 0.02),
            **overrides: Any) -> Dict[str, Any]:
        runs: List[Dict[str, Any]] = []
        for d in post_distances:
            scene_overrides = dict(overrides)
            scene_overrides["untangle"] = {**overrides.get("untangle", {}), "post_distance": d}
            scene = self.load_scene(**scene_overrides)
            result = run_scenario(scene, _subdir(output_dir, f"d_{d:g}"))
            value = self.rebound(result)
            result.metrics = {"post_distance": d, "rebound": value}
            illegal = result.illegal_counts()
            runs.append({
                "post_distance": d,
                "rebound": value,
                "max_frame_crossings": max(result.crossing_counts(), default=0),
                "illegal_vertices": illegal,
                "illegal_non_increasing": all(b <= a for a, b in zip(illegal, illegal[1:])),
            })
            logger.info(f"two_tori d={d:g}: rebound {value}")
        rebounds = [run["rebound"] for run in runs]
        monotone = None not in rebounds and all(a <= b for a, b in zip(rebounds, rebounds[1:]))
        return {"scenario": self.name, "runs": runs, "monotone": monotone}


class IntervalSweepScenario(BaseScenario):
    """Collision handling every step versus once every k steps."""

    def __init__(self, scene_file: Optional[str] = None):
        super().__init__(
            name="interval_sweep",
            description="Sheet draped over a sphere with varying collision intervals",
            scene_file=scene_file,
        )

    def run(self, output_dir: Optional[str] = None, intervals: Sequence[int] = (1, 8), **overrides: Any) -> Dict[str, Any]:
        runs = []
        for k in intervals:
            scene = self.load_scene(collision_interval=k, **overrides)
            if scene.output_interval % k:
                logger.warning(f"output interval {scene.output_interval} is not a multiple of k={k}; frames may show crossings")
            result = run_scenario(scene, _subdir(output_dir, f"k_{k}"))
            counts = result.crossing_counts()
            runs.append({
                "collision_interval": k,
                "frames": len(counts),
                "max_frame_crossings": max(counts, default=0),
                "max_illegal_vertices": max(result.illegal_counts(), default=0),
                "untangle_calls": len(result.untangle_calls),
                "unresolved_calls": sum(1 for call in result.untangle_calls if call.final_intersection_count),
            })
            logger.info(f"interval_sweep k={k}: max {runs[-1]['max_frame_crossings']} crossings over {len(counts)} frames")
        return {"scenario": self.name, "runs": runs}


def register_spike_sheet_scenario(scene_file: Optional[str] = None) -> SpikeSheetScenario:
    """
    Create and register the spike/sheet scenario.

    Returns:
        The created scenario
    """
    try:
        # Try importing with the full package path (for local development)
        from untangle.backend.simulation.base import scenario_registry
    except ImportError:
        # Fall back to relative import (for installed / in-tree use)
        from backend.simulation.base import scenario_registry

    scenario = SpikeSheetScenario(scene_file)
    scenario_registry.register(scenario)
    return scenario


def register_two_tori_scenario(scene_file: Optional[str] = None) -> TwoToriScenario:
    try:
        # Try importing with the full package path (for local development)
        from untangle.backend.simulation.base import scenario_registry
    except ImportError:
        # Fall back to relative import (for installed / in-tree use)
        from backend.simulation.base import scenario_registry

    scenario = TwoToriScenario(scene_file)
    scenario_registry.register(scenario)
    return scenario


def register_interval_sweep_scenario(scene_file: Optional[str] = None) -> IntervalSweepScenario:
    try:
        # Try importing with the full package path (for local development)
        from untangle.backend.simulation.base import scenario_registry
    except ImportError:
        # Fall back to relative import (for installed / in-tree use)
        from backend.simulation.base import scenario_registry

    scenario = IntervalSweepScenario(scene_file)
    scenario_registry.register(scenario)
    return scenario


def register_default_scenarios() -> List[str]:
    """Register every shipped scenario; returns their names."""
    register_spike_sheet_scenario()
    register_two_tori_scenario()
    register_interval_sweep_scenario()
    try:
        # Try importing with the full package path (for local development)
        from untangle.backend.simulation.base import scenario_registry
    except ImportError:
        # Fall back to relative import (for installed / in-tree use)
        from backend.simulation.base import scenario_registry
    return scenario_registry.list_scenarios()
