"""
Shared mesh fixtures for the untangle tests.
"""

import os
import sys

import numpy as np

# Add the parent directory to the path so we can import the modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from backend.geometry.mesh import TriangleMesh
from backend.geometry.primitives import icosphere


def floor_triangle(oriented: bool = True, name: str = "face", masses=1.0) -> TriangleMesh:
    """Triangle (0,0,0), (1,0,0), (0,1,0) with normal +z."""
    return TriangleMesh([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], [[0, 1, 2]], oriented=oriented, masses=masses, name=name)


def stick(depth: float = 0.4, name: str = "stick", masses=1.0) -> TriangleMesh:
    """
    A sliver triangle whose edge 0-1 pierces floor_triangle at (0.25, 0.25, 0).

    Vertex 0 sits `depth` below the floor; the other two edges miss it.
    """
    return TriangleMesh(
        [[0.25, 0.25, -depth], [0.25, 0.25, 1.0 - depth], [5.0, 5.0, 1.0 - depth]],
        [[0, 1, 2]],
        oriented=False,
        masses=masses,
        name=name,
    )


def sphere_pair(distance: float = 1.6, subdivisions: int = 2, oriented=(True, True)):
    """Two unit icospheres whose centers are `distance` apart along x."""
    a = icosphere(1.0, subdivisions, center=(0.0, 0.0, 0.0), oriented=oriented[0], name="left")
    b = icosphere(1.0, subdivisions, center=(distance, 0.0, 0.0), oriented=oriented[1], name="right")
    return a, b


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def twin_spikes(depths=(0.3, 0.1), name: str = "spikes") -> TriangleMesh:
    """
    Two pinned slivers whose vertical edges pierce floor_triangle.

    The edges pass through (0.25, 0.25, 0) and (0.5, 0.2, 0); their lower
    vertices (0 and 3) sit depths[0] and depths[1] below the floor.
    """
    low, high = depths
    return TriangleMesh(
        [
            [0.25, 0.25, -low], [0.25, 0.25, 1.0 - low], [5.0, 5.0, 1.0 - low],
            [0.5, 0.2, -high], [0.5, 0.2, 1.0 - high], [5.0, -5.0, 1.0 - high],
        ],
        [[0, 1, 2], [3, 4, 5]],
        oriented=False,
        masses=np.inf,
        name=name,
    )


def valley(depth: float = 0.2, name: str = "valley") -> TriangleMesh:
    """A folded strip over x in [-1, 1] whose crease (vertices 1 and 4) dips `depth` below z = 0."""
    return TriangleMesh(
        [
            [-1.0, -0.5, 0.3], [0.0, -0.5, -depth], [1.0, -0.5, 0.3],
            [-1.0, 0.5, 0.3], [0.0, 0.5, -depth], [1.0, 0.5, 0.3],
        ],
        [[0, 1, 4], [0, 4, 3], [1, 2, 5], [1, 5, 4]],
        oriented=False,
        name=name,
    )


def ground(half_width: float = 2.0, name: str = "ground") -> TriangleMesh:
    """A pinned square in z = 0 with normal +z."""
    h = half_width
    return TriangleMesh(
        [[-h, -h, 0.0], [h, -h, 0.0], [h, h, 0.0], [-h, h, 0.0]],
        [[0, 1, 2], [0, 2, 3]],
        oriented=True,
        masses=np.inf,
        name=name,
    )
