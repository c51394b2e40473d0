"""
Primitive mesh generators.

All closed primitives are wound counterclockwise seen from outside, so their
normals point outward and enclosed_volume() is positive. Used for scene
primitives and as test fixtures.
"""

from typing import Dict, List, Sequence, Tuple

import numpy as np

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.geometry.mesh import TriangleMesh
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.geometry.mesh import TriangleMesh

_PHI = (1.0 + np.sqrt(5.0)) / 2.0

_ICOSAHEDRON_VERTICES = [
    [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
    [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
    [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
]

_ICOSAHEDRON_FACES = [
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
]


def unit_cube(oriented: bool = True, name: str = "cube", inward: bool = False) -> TriangleMesh:
    """
    The cube [0, 1]^3 as 12 triangles.

    Args:
        oriented: Orientation flag
        name: Mesh name
        inward: Flip every face (negative enclosed volume)
    """
    vertices = [
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
    ]
    faces = [
        [0, 2, 1], [0, 3, 2],  # z = 0
        [4, 5, 6], [4, 6, 7],  # z = 1
        [0, 1, 5], [0, 5, 4],  # y = 0
        [2, 3, 7], [2, 7, 6],  # y = 1
        [0, 4, 7], [0, 7, 3],  # x = 0
        [1, 2, 6], [1, 6, 5],  # x = 1
    ]
    if inward:
        faces = [[a, c, b] for a, b, c in faces]
    return TriangleMesh(vertices, faces, oriented=oriented, name=name)


def icosahedron(radius: float = 1.0, oriented: bool = True, name: str = "icosahedron") -> TriangleMesh:
    """Regular icosahedron inscribed in a sphere of the given radius."""
    return icosphere(radius, 0, oriented=oriented, name=name)


def icosphere(
    radius: float = 1.0,
    subdivisions: int = 2,
    center: Sequence[float] = (0.0, 0.0, 0.0),
    oriented: bool = True,
    name: str = "icosphere",
) -> TriangleMesh:
    """
    Sphere approximation by repeated 1-to-4 subdivision of an icosahedron.

    Subdivision level s gives 20 * 4^s faces (2 -> 320, 3 -> 1280).

    Args:
        radius: Sphere radius in meters
        subdivisions: Subdivision count
        center: Sphere center
        oriented: Orientation flag
        name: Mesh name
    """
    vertices = np.array(_ICOSAHEDRON_VERTICES, dtype=np.float64)
    vertices /= np.linalg.norm(vertices, axis=1, keepdims=True)
    verts: List[np.ndarray] = list(vertices)
    faces = [list(face) for face in _ICOSAHEDRON_FACES]

    for _ in range(subdivisions):
        midpoints: Dict[Tuple[int, int], int] = {}
        refined = []

        def midpoint(i: int, j: int) -> int:
            key = (min(i, j), max(i, j))
            if key not in midpoints:
                mid = (verts[i] + verts[j]) / 2.0
                verts.append(mid / np.linalg.norm(mid))
                midpoints[key] = len(verts) - 1
            return midpoints[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]])
        faces = refined

    positions = np.array(verts) * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(positions, faces, oriented=oriented, name=name)


def torus(
    major_radius: float = 1.0,
    minor_radius: float = 0.25,
    major_sections: int = 24,
    minor_sections: int = 24,
    center: Sequence[float] = (0.0, 0.0, 0.0),
    oriented: bool = True,
    name: str = "torus",
) -> TriangleMesh:
    """
    Torus around the z axis with major_sections x minor_sections vertices.

    The defaults give 576 vertices.
    """
    u = 2.0 * np.pi * np.arange(major_sections) / major_sections
    v = 2.0 * np.pi * np.arange(minor_sections) / minor_sections
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring = major_radius + minor_radius * np.cos(vv)
    positions = np.stack([ring * np.cos(uu), ring * np.sin(uu), minor_radius * np.sin(vv)], axis=-1).reshape(-1, 3)
    positions += np.asarray(center, dtype=np.float64)

    faces = []
    for i in range(major_sections):
        i1 = (i + 1) % major_sections
        for j in range(minor_sections):
            j1 = (j + 1) % minor_sections
            a, b = i * minor_sections + j, i1 * minor_sections + j
            c, d = i1 * minor_sections + j1, i * minor_sections + j1
            # d(position)/du x d(position)/dv points away from the tube axis
            faces.append([a, b, c])
            faces.append([a, c, d])
    return TriangleMesh(positions, faces, oriented=oriented, name=name)


def grid_sheet(
    nx: int = 45,
    ny: int = 45,
    width: float = 2.0,
    height: float = 2.0,
    center: Sequence[float] = (0.0, 0.0, 0.0),
    oriented: bool = False,
    name: str = "sheet",
) -> TriangleMesh:
    """
    Flat rectangular sheet in a z = const plane with nx x ny vertices.

    Diagonals alternate between cells so the sheet has no preferred shear
    direction. Front faces point along +z.
    """
    xs = np.linspace(-width / 2.0, width / 2.0, nx)
    ys = np.linspace(-height / 2.0, height / 2.0, ny)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    positions = np.stack([xx, yy, np.zeros_like(xx)], axis=-1).reshape(-1, 3)
    positions += np.asarray(center, dtype=np.float64)

    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a, b = i * ny + j, (i + 1) * ny + j
            c, d = (i + 1) * ny + j + 1, i * ny + j + 1
            if (i + j) % 2 == 0:
                faces.extend([[a, b, c], [a, c, d]])
            else:
                faces.extend([[a, b, d], [b, c, d]])
    return TriangleMesh(positions, faces, oriented=oriented, name=name)


def spike(
    radius: float = 0.25,
    height: float = 1.0,
    sections: int = 12,
    base: Sequence[float] = (0.0, 0.0, 0.0),
    oriented: bool = True,
    name: str = "spike",
) -> TriangleMesh:
    """
    Closed cone standing on the z = base plane with its tip at base + height.

    Vertex 0 is the base center, vertex 1 the tip, then the rim.
    """
    angles = 2.0 * np.pi * np.arange(sections) / sections
    rim = np.stack([radius * np.cos(angles), radius * np.sin(angles), np.zeros(sections)], axis=-1)
    positions = np.vstack([[0.0, 0.0, 0.0], [0.0, 0.0, height], rim]) + np.asarray(base, dtype=np.float64)

    faces = []
    for i in range(sections):
        r0, r1 = 2 + i, 2 + (i + 1) % sections
        faces.append([r0, r1, 1])
        faces.append([0, r1, r0])
    return TriangleMesh(positions, faces, oriented=oriented, name=name)


def translated(mesh: TriangleMesh, offset: Sequence[float]) -> TriangleMesh:
    """Copy of a mesh moved by a constant offset."""
    return mesh.with_positions(mesh.vertices + np.asarray(offset, dtype=np.float64))


PRIMITIVES = {
    "cube": unit_cube,
    "icosahedron": icosahedron,
    "icosphere": icosphere,
    "torus": torus,
    "sheet": grid_sheet,
    "spike": spike,
}
