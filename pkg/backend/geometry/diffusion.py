"""
Diffusion of correction vectors.

Spreads the per-vertex corrections of the response step into the surrounding
rings of the mesh so the applied displacement field has no sharp jumps. Each
Jacobi sweep replaces every free vertex value by the average of its 1-ring;
Dirichlet vertices keep their prescribed values and vertices outside the
active region hold zero, which makes the region boundary a zero boundary.
"""

import logging
from typing import Mapping, Optional, Sequence, Union

import numpy as np

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.app.models import DiffusionConfig
    from untangle.backend.geometry.mesh import TriangleMesh, VertexRings
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.app.models import DiffusionConfig
    from backend.geometry.mesh import TriangleMesh, VertexRings

# Configure logging
logger = logging.getLogger("untangle.diffusion")


class DisplacementField:
    """
    Per-vertex displacement vectors of one mesh.

    Args:
        values: (n, 3) displacements in meters
        dirichlet: Indices whose values are fixed
        active: Mask of vertices that may carry a non-zero value
        mesh_name: Owning mesh
    """

    def __init__(self, values: np.ndarray, dirichlet: Sequence[int], active: np.ndarray, mesh_name: str = ""):
        self.values = np.array(values, dtype=np.float64).reshape(-1, 3)
        self.dirichlet = np.unique(np.asarray(dirichlet, dtype=np.int64))
        self.active = np.asarray(active, dtype=bool).copy()
        self.active[self.dirichlet] = True
        self.values[~self.active] = 0.0
        self.mesh_name = mesh_name
        self.sweeps = 0

    @classmethod
    def from_corrections(
        cls,
        mesh: TriangleMesh,
        corrections: Mapping[int, np.ndarray],
        rings: int,
    ) -> "DisplacementField":
        """
        Field with Dirichlet values at the corrected vertices.

        The active region is every vertex within `rings` rings of a corrected
        vertex. Pinned vertices inside it are held at zero.
        """
        values = np.zeros((mesh.n_vertices, 3))
        indices = sorted(corrections)
        for index in indices:
            values[index] = corrections[index]
        active = mesh.rings.within(indices, rings) if indices else np.zeros(mesh.n_vertices, dtype=bool)
        pinned = np.flatnonzero(mesh.pinned & active)
        values[pinned] = 0.0
        dirichlet = np.union1d(np.asarray(indices, dtype=np.int64), pinned)
        return cls(values, dirichlet, active, mesh.name)

    @property
    def free(self) -> np.ndarray:
        """Mask of active vertices that diffusion may change."""
        mask = self.active.copy()
        mask[self.dirichlet] = False
        return mask

    def copy(self) -> "DisplacementField":
        field = DisplacementField(self.values, self.dirichlet, self.active, self.mesh_name)
        field.sweeps = self.sweeps
        return field

    def max_magnitude(self) -> float:
        return float(np.max(np.linalg.norm(self.values, axis=1))) if len(self.values) else 0.0


def diffuse(
    field: DisplacementField,
    mesh: Union[TriangleMesh, VertexRings],
    config: Optional[DiffusionConfig] = None,
) -> DisplacementField:
    """
    Run Jacobi sweeps over the free vertices of a field.

    Args:
        field: Field with its Dirichlet set and active region
        mesh: The mesh (or its VertexRings) supplying 1-ring adjacency
        config: Sweep count and early-stop tolerance; only iters and tol are used
            here, the ring radius is fixed when the field is built

    Returns:
        A new field; Dirichlet values are unchanged
    """
    config = config or DiffusionConfig()
    rings = mesh.rings if isinstance(mesh, TriangleMesh) else mesh
    result = field.copy()
    free = np.flatnonzero(result.free)
    if len(free) == 0 or config.iters == 0:
        return result

    adjacency = rings.adjacency_matrix()[free]
    degree = np.asarray(adjacency.sum(axis=1)).reshape(-1)
    degree[degree == 0] = 1.0

    values = result.values
    for sweep in range(1, config.iters + 1):
        averaged = (adjacency @ values) / degree[:, None]
        delta = float(np.max(np.abs(averaged - values[free])))
        values = values.copy()
        values[free] = averaged
        result.sweeps = sweep
        if delta < config.tol:
            break
    result.values = values
    logger.debug(f"Diffused field on '{field.mesh_name}' over {len(free)} free vertices in {result.sweeps} sweeps")
    return result


def apply_field(field: DisplacementField, positions: np.ndarray) -> np.ndarray:
    """positions + field values, for all vertices."""
    return np.asarray(positions, dtype=np.float64) + field.values
