"""
Untangler Module for untangle

The outer loop that repairs interpenetration between two meshes:

    detect -> classify -> build stencils -> solve zones -> diffuse -> apply

repeated until a detection pass finds no edge-face crossings or the iteration
budget runs out. The final status is always certified by a fresh scan of the
output meshes.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.app.models import IterationStats, UntangleConfig, UntangleReport, UntangleStatus
    from untangle.backend.app.phase_tracker import PhaseTracker
    from untangle.backend.geometry.dcd import EdgeFaceIntersection, find_intersections, find_self_intersections
    from untangle.backend.geometry.diffusion import DisplacementField, apply_field, diffuse
    from untangle.backend.geometry.errors import MeshError, OrientationError
    from untangle.backend.geometry.mesh import TriangleMesh, save_obj
    from untangle.backend.geometry.response import ZoneSolution, solve_zone
    from untangle.backend.geometry.stencil import ImpactZone, VertexKey, build_stencils, classify_vertices, partition_impact_zones
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.app.models import IterationStats, UntangleConfig, UntangleReport, UntangleStatus
    from backend.app.phase_tracker import PhaseTracker
    from backend.geometry.dcd import EdgeFaceIntersection, find_intersections, find_self_intersections
    from backend.geometry.diffusion import DisplacementField, apply_field, diffuse
    from backend.geometry.errors import MeshError, OrientationError
    from backend.geometry.mesh import TriangleMesh, save_obj
    from backend.geometry.response import ZoneSolution, solve_zone
    from backend.geometry.stencil import ImpactZone, VertexKey, build_stencils, classify_vertices, partition_impact_zones

# Configure logging
logger = logging.getLogger("untangle.untangler")

# Consecutive strict increases of the intersection count that engage damping
OSCILLATION_WINDOW = 3


def _check_pair(mesh_a: TriangleMesh, mesh_b: TriangleMesh) -> None:
    if not (mesh_a.oriented or mesh_b.oriented):
        raise OrientationError("at least one mesh must be oriented")
    if mesh_a.name == mesh_b.name:
        raise MeshError(f"meshes must have distinct names (both are '{mesh_a.name}')")


def detection_directions(
    mesh_a: TriangleMesh, mesh_b: TriangleMesh, iteration: int = 0, alternate: bool = True
) -> List[Tuple[TriangleMesh, TriangleMesh]]:
    """
    (edge mesh, face mesh) pairs scanned in one iteration.

    The oriented mesh supplies the faces. When both are oriented and
    alternation is on, even iterations use B as the face side and odd
    iterations use A; with alternation off both directions are scanned.
    """
    _check_pair(mesh_a, mesh_b)
    if mesh_a.oriented and mesh_b.oriented:
        if not alternate:
            return [(mesh_a, mesh_b), (mesh_b, mesh_a)]
        return [(mesh_a, mesh_b)] if iteration % 2 == 0 else [(mesh_b, mesh_a)]
    if mesh_b.oriented:
        return [(mesh_a, mesh_b)]
    return [(mesh_b, mesh_a)]


def count_crossings(
    mesh_a: TriangleMesh, mesh_b: TriangleMesh, config: Optional[UntangleConfig] = None, skip_faces: Sequence[str] = ()
) -> int:
    """
    Edge-face crossings in every direction whose face mesh is oriented.

    This is the certification scan: both directions are counted when both
    meshes are oriented.

    Args:
        mesh_a: First mesh
        mesh_b: Second mesh
        config: Supplies tolerances and thread count
        skip_faces: Face meshes whose direction is already known to be clean
    """
    config = config or UntangleConfig()
    total = 0
    for edge_mesh, face_mesh in detection_directions(mesh_a, mesh_b, alternate=False):
        if face_mesh.name in skip_faces:
            continue
        total += len(find_intersections(edge_mesh, face_mesh, config.tolerances, config.threads))
    return total


def count_illegal_vertices(mesh_a: TriangleMesh, mesh_b: TriangleMesh, config: Optional[UntangleConfig] = None) -> int:
    """Vertices left on the wrong side of an oriented surface, scanning every direction."""
    config = config or UntangleConfig()
    intersections: List[EdgeFaceIntersection] = []
    for edge_mesh, face_mesh in detection_directions(mesh_a, mesh_b, alternate=False):
        intersections.extend(find_intersections(edge_mesh, face_mesh, config.tolerances, config.threads))
    if not intersections:
        return 0
    return len(classify_vertices(intersections, {mesh_a.name: mesh_a, mesh_b.name: mesh_b}).illegal())


def _solve_zones(
    zones: List[ImpactZone], masses: Dict[str, np.ndarray], positions: Dict[str, np.ndarray], config: UntangleConfig
) -> List[ZoneSolution]:
    def run(indexed: Tuple[int, ImpactZone]) -> ZoneSolution:
        index, zone = indexed
        solution = solve_zone(zone, positions, masses, config.post_distance, zone_index=index)
        if not solution.diagnostics.converged:
            logger.warning(
                f"Zone {index}: least-squares correction leaves relative residual {solution.diagnostics.residual:.3e}"
            )
        return solution

    if config.threads > 1 and len(zones) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as executor:
            return list(executor.map(run, enumerate(zones)))
    return [run(item) for item in enumerate(zones)]


def _apply_corrections(
    meshes: Dict[str, TriangleMesh],
    corrections: Dict[VertexKey, np.ndarray],
    apex_meshes: set,
    config: UntangleConfig,
) -> Dict[str, TriangleMesh]:
    by_mesh: Dict[str, Dict[int, np.ndarray]] = {name: {} for name in meshes}
    for (name, vertex), delta in corrections.items():
        by_mesh[name][vertex] = delta

    updated = {}
    for name, mesh in meshes.items():
        if not by_mesh[name]:
            updated[name] = mesh
            continue
        if name in apex_meshes:
            field = DisplacementField.from_corrections(mesh, by_mesh[name], config.diffusion.rings)
            field = diffuse(field, mesh, config.diffusion)
            updated[name] = mesh.with_positions(apply_field(field, mesh.vertices))
        else:
            positions = mesh.vertices.copy()
            for vertex, delta in by_mesh[name].items():
                positions[vertex] += delta
            updated[name] = mesh.with_positions(positions)
    return updated


def untangle_step(
    mesh_a: TriangleMesh,
    mesh_b: TriangleMesh,
    config: Optional[UntangleConfig] = None,
    iteration: int = 0,
    damping: float = 1.0,
    tracker: Optional[PhaseTracker] = None,
) -> Tuple[TriangleMesh, TriangleMesh, IterationStats]:
    """
    Run one detect / relocate / diffuse pass.

    Zones the direct solve cannot meet get the least-squares correction of
    the active-set fallback and are counted in the stats; any crossing they
    leave is detected again in the next pass.

    Args:
        mesh_a: First mesh
        mesh_b: Second mesh
        config: Loop configuration
        iteration: 0-based pass index (selects the face side when both are oriented)
        damping: Factor applied to every correction
        tracker: Phase tracker to record into (a private one is used if omitted)

    Returns:
        The updated meshes and the pass statistics
    """
    config = config or UntangleConfig()
    tracker = tracker or PhaseTracker(f"step {iteration}")
    step_tracker = PhaseTracker(f"step {iteration}")
    directions = detection_directions(mesh_a, mesh_b, iteration, config.alternate_orientation)
    meshes = {mesh_a.name: mesh_a, mesh_b.name: mesh_b}
    stats = IterationStats(iteration=iteration, face_meshes=[face.name for _, face in directions], damping=damping)

    with step_tracker.track("detect"):
        intersections: List[EdgeFaceIntersection] = []
        for edge_mesh, face_mesh in directions:
            intersections.extend(find_intersections(edge_mesh, face_mesh, config.tolerances, config.threads))
    stats.intersection_count = len(intersections)

    if intersections:
        with step_tracker.track("classify"):
            legality = classify_vertices(intersections, meshes)
        with step_tracker.track("stencil"):
            stencils = build_stencils(intersections, meshes, legality)
            zones = partition_impact_zones(stencils)
        stats.illegal_vertex_count = len(legality.illegal())
        stats.stencil_count = len(stencils)
        stats.zone_count = len(zones)
        stats.max_abs_distance = max((abs(s.distance) for s in stencils), default=0.0)

        with step_tracker.track("solve"):
            positions = {name: mesh.vertices for name, mesh in meshes.items()}
            masses = {name: mesh.masses for name, mesh in meshes.items()}
            results = _solve_zones(zones, masses, positions, config)

        corrections: Dict[VertexKey, np.ndarray] = {}
        for solution in results:
            stats.zones.append(solution.diagnostics)
            if solution.diagnostics.solver.endswith("active-set"):
                stats.relaxed_zones += 1
            if not solution.diagnostics.converged:
                stats.unconverged_zones += 1
            for key, delta in solution.corrections.items():
                corrections[key] = damping * delta

        with step_tracker.track("diffuse"):
            apex_meshes = {s.apex[0] for s in stencils}
            meshes = _apply_corrections(meshes, corrections, apex_meshes, config)

        if config.report_self_intersections:
            with step_tracker.track("self_check"):
                stats.self_intersections = sum(
                    len(find_self_intersections(meshes[name], config.tolerances, config.threads)) for name in sorted(apex_meshes)
                )
            if stats.self_intersections:
                logger.warning(f"Iteration {iteration}: {stats.self_intersections} self-intersections after diffusion")

    stats.phase_seconds = step_tracker.summary()
    tracker.merge(step_tracker)
    logger.info(
        f"Iteration {iteration}: {stats.intersection_count} intersections, {stats.stencil_count} stencils, "
        f"{stats.zone_count} zones, {stats.relaxed_zones} relaxed, {stats.unconverged_zones} unconverged"
    )
    return meshes[mesh_a.name], meshes[mesh_b.name], stats


def _write_snapshots(meshes: Tuple[TriangleMesh, ...], directory: str, iteration: int) -> None:
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    for mesh in meshes:
        save_obj(mesh, path / f"{mesh.name}_iter{iteration:04d}.obj")


def untangle(
    mesh_a: TriangleMesh, mesh_b: TriangleMesh, config: Optional[UntangleConfig] = None
) -> Tuple[Tuple[TriangleMesh, TriangleMesh], UntangleReport]:
    """
    Repeat untangle_step until no crossings remain or max_iters is reached.

    Args:
        mesh_a: First mesh
        mesh_b: Second mesh (the face side first when both are oriented)
        config: Loop configuration

    Returns:
        The output meshes and the run report; the status is Resolved only if
        the certification scan of the outputs found zero crossings
    """
    config = config or UntangleConfig()
    _check_pair(mesh_a, mesh_b)
    tracker = PhaseTracker("untangle")
    iterations: List[IterationStats] = []
    damping = 1.0
    increases = 0
    final_count: Optional[int] = None

    for iteration in range(config.max_iters):
        mesh_a, mesh_b, stats = untangle_step(mesh_a, mesh_b, config, iteration, damping, tracker)
        iterations.append(stats)

        if config.snapshot_every and (iteration + 1) % config.snapshot_every == 0:
            _write_snapshots((mesh_a, mesh_b), config.snapshot_dir or ".", iteration + 1)

        if stats.intersection_count == 0:
            # Nothing moved, so only the directions this step did not scan need certifying
            with tracker.track("certify"):
                final_count = count_crossings(mesh_a, mesh_b, config, skip_faces=stats.face_meshes)
            if final_count == 0:
                break
            final_count = None

        if len(iterations) > 1 and stats.intersection_count > iterations[-2].intersection_count:
            increases += 1
        else:
            increases = 0
        if config.oscillation_damping and damping == 1.0 and increases >= OSCILLATION_WINDOW:
            damping = config.damping_factor
            logger.warning(f"Intersection count rose {increases} times in a row; damping corrections by {damping}")

    if final_count is None:
        with tracker.track("certify"):
            final_count = count_crossings(mesh_a, mesh_b, config)

    status = UntangleStatus.RESOLVED if final_count == 0 else UntangleStatus.EXHAUSTED
    report = UntangleReport(
        meshes=[mesh_a.name, mesh_b.name],
        status=status,
        iterations=iterations,
        final_intersection_count=final_count,
        phase_seconds=tracker.summary(),
        config=config,
    )
    logger.info(f"Untangle {status.value} after {len(iterations)} iterations ({final_count} crossings remain)")
    return (mesh_a, mesh_b), report
