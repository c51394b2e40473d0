"""
Dynamics Module for untangle

A small mass-spring harness that drives meshes into contact so the untangle
loop has something to repair. Integration is semi-implicit Euler:

    v += dt * F / m
    x += dt * v

with gravity, edge springs (rest lengths from the input meshes) and a
volume-dependent pressure on closed bodies. Every k-th step the untangle loop
runs on each mesh pair with at least one oriented mesh, and the positional
corrections are fed back into the velocities as v += dx / dt.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.app.models import FrameRecord, ScenarioResult, UntangleCall
    from untangle.backend.app.phase_tracker import PhaseTracker
    from untangle.backend.geometry.errors import SimulationError
    from untangle.backend.geometry.mesh import TriangleMesh, enclosed_volume, save_obj
    from untangle.backend.geometry.untangler import count_crossings, count_illegal_vertices, untangle
    from untangle.backend.simulation.scene import SceneConfig, build_meshes
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.app.models import FrameRecord, ScenarioResult, UntangleCall
    from backend.app.phase_tracker import PhaseTracker
    from backend.geometry.errors import SimulationError
    from backend.geometry.mesh import TriangleMesh, enclosed_volume, save_obj
    from backend.geometry.untangler import count_crossings, count_illegal_vertices, untangle
    from backend.simulation.scene import SceneConfig, build_meshes

# Configure logging
logger = logging.getLogger("untangle.dynamics")


@dataclass
class SimState:
    """
    Positions (inside the meshes), velocities and time of a running scene.

    Pinned vertices are the infinite-mass vertices of each mesh; their
    velocity is held at zero.
    """

    meshes: Dict[str, TriangleMesh]
    velocities: Dict[str, np.ndarray]
    rest_lengths: Dict[str, np.ndarray]
    dt: float
    time: float = 0.0
    step_index: int = 0

    def positions(self, name: str) -> np.ndarray:
        return self.meshes[name].vertices

    def pinned(self, name: str) -> np.ndarray:
        return self.meshes[name].pinned

    def momentum(self) -> np.ndarray:
        """Total linear momentum of the free vertices."""
        total = np.zeros(3)
        for name, mesh in self.meshes.items():
            free = ~mesh.pinned
            total += (mesh.masses[free, None] * self.velocities[name][free]).sum(axis=0)
        return total


def initial_state(scene: SceneConfig, meshes: Optional[List[TriangleMesh]] = None) -> SimState:
    """
    State at t = 0: scene meshes, initial velocities, spring rest lengths.

    Args:
        scene: The scene
        meshes: Prebuilt meshes in scene order (built from the scene if omitted)
    """
    meshes = meshes if meshes is not None else build_meshes(scene)
    velocities, rest_lengths = {}, {}
    for spec, mesh in zip(scene.meshes, meshes):
        velocity = np.tile(np.asarray(spec.initial_velocity, dtype=np.float64), (mesh.n_vertices, 1))
        velocity[mesh.pinned] = 0.0
        velocities[mesh.name] = velocity
        ends = mesh.edges.edges
        rest_lengths[mesh.name] = np.linalg.norm(mesh.vertices[ends[:, 1]] - mesh.vertices[ends[:, 0]], axis=1)
    return SimState(
        meshes={mesh.name: mesh for mesh in meshes},
        velocities=velocities,
        rest_lengths=rest_lengths,
        dt=scene.dt,
    )


def spring_forces(
    mesh: TriangleMesh, positions: np.ndarray, velocities: np.ndarray, rest_lengths: np.ndarray, stiffness: float, damping: float
) -> np.ndarray:
    """
    Hooke springs along every edge with damping along the spring axis.

    f_i = [k (|x_j - x_i| - L) + c (v_j - v_i) . u] u,  f_j = -f_i,
    u the unit vector from i to j.
    """
    forces = np.zeros_like(positions)
    if stiffness == 0.0 and damping == 0.0:
        return forces
    ends = mesh.edges.edges
    delta = positions[ends[:, 1]] - positions[ends[:, 0]]
    length = np.linalg.norm(delta, axis=1)
    axis = delta / np.where(length > 0, length, 1.0)[:, None]
    relative = np.einsum("ij,ij->i", velocities[ends[:, 1]] - velocities[ends[:, 0]], axis)
    magnitude = stiffness * (length - rest_lengths) + damping * relative
    pull = magnitude[:, None] * axis
    np.add.at(forces, ends[:, 0], pull)
    np.add.at(forces, ends[:, 1], -pull)
    return forces


def pressure_force(mesh: TriangleMesh, positions: np.ndarray, coefficient: float) -> np.ndarray:
    """
    Per-vertex forces of an internal pressure p = coefficient / V.

    Each face pushes with p * area along its outward normal, split equally
    over its three vertices.

    Args:
        mesh: Closed oriented mesh
        positions: (n, 3) current positions
        coefficient: p * V, held constant

    Returns:
        (n, 3) forces

    Raises:
        OpenMeshError: If the mesh is not closed
    """
    volume = enclosed_volume(mesh, positions)
    if volume <= 0.0:
        raise SimulationError(f"mesh '{mesh.name}' has non-positive volume {volume:.3e}", mesh=mesh.name)
    pressure = coefficient / volume
    faces = mesh.faces
    # cross / 2 is area * unit normal
    area_normals = 0.5 * np.cross(positions[faces[:, 1]] - positions[faces[:, 0]], positions[faces[:, 2]] - positions[faces[:, 0]])
    per_vertex = np.repeat(pressure * area_normals / 3.0, 3, axis=0)
    forces = np.zeros_like(positions)
    np.add.at(forces, faces.reshape(-1), per_vertex)
    return forces


def _check_finite(values: np.ndarray, what: str, state: SimState, name: str) -> None:
    bad = ~np.isfinite(values).all(axis=1)
    if np.any(bad):
        vertex = int(np.flatnonzero(bad)[0])
        message = f"non-finite {what} at step {state.step_index}, mesh '{name}', vertex {vertex}"
        logger.error(message)
        raise SimulationError(message, step=state.step_index, mesh=name, vertex=vertex)


def _collision_pairs(meshes: Dict[str, TriangleMesh]) -> List[Tuple[str, str]]:
    names = list(meshes)
    return [
        (a, b)
        for i, a in enumerate(names)
        for b in names[i + 1:]
        if meshes[a].oriented or meshes[b].oriented
    ]


def handle_collisions(state: SimState, scene: SceneConfig, calls: Optional[List[UntangleCall]] = None,
                      tracker: Optional[PhaseTracker] = None) -> SimState:
    """
    Untangle every eligible mesh pair and feed the corrections into velocities.

    Only vertices whose positions changed get a velocity update.
    """
    tracker = tracker or PhaseTracker("collisions")
    for name_a, name_b in _collision_pairs(state.meshes):
        before = {name: state.meshes[name].vertices for name in (name_a, name_b)}
        with tracker.track("untangle"):
            (mesh_a, mesh_b), report = untangle(state.meshes[name_a], state.meshes[name_b], scene.untangle)
        for mesh in (mesh_a, mesh_b):
            displacement = mesh.vertices - before[mesh.name]
            moved = np.any(displacement != 0.0, axis=1)
            if np.any(moved):
                state.velocities[mesh.name][moved] += displacement[moved] / state.dt
            state.meshes[mesh.name] = mesh
        initial = report.iterations[0].intersection_count if report.iterations else 0
        if calls is not None:
            calls.append(UntangleCall(
                step=state.step_index,
                meshes=[name_a, name_b],
                status=report.status,
                iterations=len(report.iterations),
                initial_intersections=initial,
                final_intersection_count=report.final_intersection_count,
            ))
        if not report.resolved:
            logger.warning(f"Step {state.step_index}: {name_a}/{name_b} left {report.final_intersection_count} crossings")
    return state


def step(state: SimState, scene: SceneConfig, calls: Optional[List[UntangleCall]] = None,
         tracker: Optional[PhaseTracker] = None) -> SimState:
    """
    Advance the state by one time step.

    Args:
        state: Current state (updated in place and returned)
        scene: The scene
        calls: List that collects a summary of every untangle call
        tracker: Phase tracker for force, integrate and untangle timings

    Returns:
        The advanced state

    Raises:
        SimulationError: On a non-finite force or position
    """
    tracker = tracker or PhaseTracker("step")
    state.step_index += 1
    gravity = np.asarray(scene.gravity, dtype=np.float64)

    for spec in scene.meshes:
        mesh = state.meshes[spec.name]
        positions, velocities = mesh.vertices, state.velocities[spec.name]
        free = ~mesh.pinned

        with tracker.track("forces"):
            forces = np.zeros_like(positions)
            forces[free] += mesh.masses[free, None] * gravity * spec.gravity_scale
            forces += spring_forces(mesh, positions, velocities, state.rest_lengths[spec.name], spec.stiffness, spec.damping)
            if spec.pressure > 0.0:
                forces += pressure_force(mesh, positions, spec.pressure)
            _check_finite(forces, "force", state, spec.name)

        with tracker.track("integrate"):
            velocities = velocities.copy()
            velocities[free] += state.dt * forces[free] / mesh.masses[free, None]
            velocities[~free] = 0.0
            updated = positions + state.dt * velocities
            _check_finite(updated, "position", state, spec.name)
            state.velocities[spec.name] = velocities
            state.meshes[spec.name] = mesh.with_positions(updated)

    state.time += state.dt
    if state.step_index >= scene.collision_start_step and state.step_index % scene.collision_interval == 0:
        handle_collisions(state, scene, calls, tracker)
    return state


def frame_crossings(state: SimState, scene: SceneConfig) -> int:
    """Edge-face crossings summed over every eligible mesh pair."""
    return sum(
        count_crossings(state.meshes[a], state.meshes[b], scene.untangle)
        for a, b in _collision_pairs(state.meshes)
    )


def frame_illegal_vertices(state: SimState, scene: SceneConfig) -> int:
    """Illegal vertices summed over every eligible mesh pair."""
    return sum(
        count_illegal_vertices(state.meshes[a], state.meshes[b], scene.untangle)
        for a, b in _collision_pairs(state.meshes)
    )


def write_frame(state: SimState, scene: SceneConfig, index: int, output_dir: Optional[str]) -> FrameRecord:
    """Count crossings and illegal vertices and, when output_dir is set, write one OBJ per mesh."""
    files = []
    if output_dir:
        directory = Path(output_dir)
        directory.mkdir(parents=True, exist_ok=True)
        for name, mesh in state.meshes.items():
            path = directory / f"{scene.name}_{index:04d}_{name}.obj"
            save_obj(mesh, path)
            files.append(str(path))
    return FrameRecord(
        index=index,
        step=state.step_index,
        time=round(state.time, 12),
        crossings=frame_crossings(state, scene),
        illegal_vertices=frame_illegal_vertices(state, scene),
        centroids={name: mesh.vertices.mean(axis=0).tolist() for name, mesh in state.meshes.items()},
        files=files,
    )


def run_scenario(scene: SceneConfig, output_dir: Optional[str] = None, meshes: Optional[List[TriangleMesh]] = None) -> ScenarioResult:
    """
    Run a scene to completion.

    A frame is recorded every output_interval steps, after collision handling
    for that step.

    Args:
        scene: The scene
        output_dir: Frame and report directory (falls back to scene.output_dir;
            nothing is written when both are unset)
        meshes: Prebuilt meshes in scene order

    Returns:
        Frames, untangle call summaries and phase timings

    Raises:
        SimulationError: Propagated from step
    """
    output_dir = output_dir or scene.output_dir
    tracker = PhaseTracker(scene.name)
    state = initial_state(scene, meshes)
    result = ScenarioResult(scene=scene.name, steps=scene.steps)
    logger.info(f"Running scene '{scene.name}': {scene.steps} steps of {scene.dt}s, {len(state.meshes)} meshes")

    for _ in range(scene.steps):
        step(state, scene, result.untangle_calls, tracker)
        if state.step_index % scene.output_interval == 0:
            with tracker.track("output"):
                frame = write_frame(state, scene, len(result.frames), output_dir)
            result.frames.append(frame)
            logger.debug(f"Frame {frame.index} at step {frame.step}: {frame.crossings} crossings")

    result.phase_seconds = tracker.summary()
    if output_dir:
        report_path = Path(output_dir) / "report.json"
        report_path.write_text(result.to_json() + "\n")
        logger.info(f"Wrote {len(result.frames)} frames and {report_path}")
    return result
