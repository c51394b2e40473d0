"""
Geometry package for untangle

Mesh containers, collision detection, penetration stencils, the constrained
projection, diffusion of corrections and the outer untangle loop.
"""

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.geometry.errors import (
        BvhError,
        DegenerateFaceError,
        MeshError,
        OpenMeshError,
        OrientationError,
        SceneConfigError,
        SimulationError,
        StencilError,
        UntangleError,
        ZoneConvergenceError,
    )
    from untangle.backend.geometry.mesh import TriangleMesh, load_obj, save_obj
    from untangle.backend.geometry.untangler import count_crossings, untangle, untangle_step
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.geometry.errors import (
        BvhError,
        DegenerateFaceError,
        MeshError,
        OpenMeshError,
        OrientationError,
        SceneConfigError,
        SimulationError,
        StencilError,
        UntangleError,
        ZoneConvergenceError,
    )
    from backend.geometry.mesh import TriangleMesh, load_obj, save_obj
    from backend.geometry.untangler import count_crossings, untangle, untangle_step

__all__ = [
    "BvhError",
    "DegenerateFaceError",
    "MeshError",
    "OpenMeshError",
    "OrientationError",
    "SceneConfigError",
    "SimulationError",
    "StencilError",
    "UntangleError",
    "ZoneConvergenceError",
    "TriangleMesh",
    "load_obj",
    "save_obj",
    "count_crossings",
    "untangle",
    "untangle_step",
]
