"""
Mesh Module for untangle

This module defines the triangle mesh representation used throughout the
untangle pipeline, the OBJ reader/writer, derived topology (edges and vertex
rings) and the geometric primitives built on top of it (face normals, areas,
enclosed volume).

Winding convention: a face (i, j, k) is counterclockwise when viewed from its
front side, so its normal is normalize((x_j - x_i) x (x_k - x_i)).
"""

import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Set, Union

import numpy as np
import scipy.sparse as sp

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.geometry.errors import DegenerateFaceError, MeshError, OpenMeshError
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.geometry.errors import DegenerateFaceError, MeshError, OpenMeshError

# Configure logging
logger = logging.getLogger("untangle.mesh")

# Faces below this area have no usable normal
AREA_TOLERANCE = 1e-12

PathLike = Union[str, Path]


class EdgeSet:
    """
    Unique undirected edges of a triangle mesh with their face incidence.

    Edges are stored as sorted vertex pairs in lexicographic order, so edge
    indices are stable for a given connectivity.
    """

    def __init__(self, faces: np.ndarray):
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        half_edges = faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        keys = np.sort(half_edges, axis=1)
        if len(keys):
            edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        else:
            edges, inverse = np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64)
        inverse = np.asarray(inverse).reshape(-1)

        self.edges = edges.astype(np.int64)
        self.edges.setflags(write=False)
        # face_edges[f, i] joins corner i and corner (i + 1) % 3 of face f
        self.face_edges = inverse.reshape(-1, 3)
        self.face_edges.setflags(write=False)

        owners = np.repeat(np.arange(len(faces)), 3)
        order = np.argsort(inverse, kind="stable")
        counts = np.bincount(inverse, minlength=len(self.edges))
        splits = np.cumsum(counts)[:-1]
        self.edge_faces: List[List[int]] = [group.tolist() for group in np.split(owners[order], splits)] if len(self.edges) else []
        self.face_counts = counts

        non_manifold = int(np.count_nonzero(counts > 2))
        if non_manifold:
            logger.warning(f"Mesh has {non_manifold} non-manifold edges (more than 2 incident faces)")

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def is_closed(self) -> bool:
        """True when every edge has exactly two incident faces."""
        return bool(len(self.edges)) and bool(np.all(self.face_counts == 2))

    def boundary_edges(self) -> np.ndarray:
        """Indices of edges with a single incident face."""
        return np.flatnonzero(self.face_counts == 1)


class VertexRings:
    """
    Topological neighborhoods of a mesh.

    ring(v, 0) is {v}; ring(v, k) adds every vertex reachable through at most
    k edges.
    """

    def __init__(self, edges: np.ndarray, n_vertices: int):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        data = np.ones(len(rows), dtype=np.float64)
        self._adjacency = sp.csr_matrix((data, (rows, cols)), shape=(n_vertices, n_vertices))
        self._adjacency.sum_duplicates()
        self._adjacency.data[:] = 1.0
        self.n_vertices = n_vertices

    def adjacency_matrix(self) -> sp.csr_matrix:
        """Symmetric 0/1 vertex adjacency as a CSR matrix."""
        return self._adjacency

    def neighbors(self, vertex: int) -> np.ndarray:
        """The 1-ring of a vertex, excluding the vertex itself."""
        start, end = self._adjacency.indptr[vertex], self._adjacency.indptr[vertex + 1]
        return self._adjacency.indices[start:end]

    def within(self, seeds: Iterable[int], k: int) -> np.ndarray:
        """
        Boolean mask of vertices within k rings of any seed vertex.

        Args:
            seeds: Seed vertex indices
            k: Ring radius (0 returns the seeds only)

        Returns:
            Mask of shape (n_vertices,)
        """
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[np.asarray(list(seeds), dtype=np.int64)] = True
        for _ in range(max(k, 0)):
            grown = mask | (self._adjacency @ mask.astype(np.float64) > 0)
            if np.array_equal(grown, mask):
                break
            mask = grown
        return mask

    def ring(self, vertex: int, k: int) -> Set[int]:
        """All vertices within topological distance k of a vertex."""
        return set(np.flatnonzero(self.within([vertex], k)).tolist())


class TriangleMesh:
    """
    Immutable triangle mesh.

    Holds the configuration point x (vertex positions), the connectivity, the
    orientation flag and the diagonal of the mass matrix. Positions change only
    by building a new mesh with with_positions().
    """

    def __init__(
        self,
        vertices: Union[np.ndarray, Sequence[Sequence[float]]],
        faces: Union[np.ndarray, Sequence[Sequence[int]]],
        oriented: bool = False,
        masses: Optional[Union[np.ndarray, Sequence[float], float]] = None,
        name: str = "mesh",
        validate: bool = True,
    ):
        """
        Initialize a mesh.

        Args:
            vertices: (n, 3) positions in meters
            faces: (m, 3) vertex indices, counterclockwise front faces
            oriented: Whether the face normals designate legal (front) sides
            masses: Per-vertex masses in kilograms, a scalar, or None for 1.0;
                numpy.inf marks a pinned vertex
            name: Identifier used in reports and intersection records
            validate: Check the mesh invariants (disabled only by with_positions)
        """
        self._vertices = np.array(vertices, dtype=np.float64).reshape(-1, 3)
        self._faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
        n = len(self._vertices)
        if masses is None:
            masses = np.ones(n)
        elif np.isscalar(masses):
            masses = np.full(n, float(masses))
        self._masses = np.array(masses, dtype=np.float64).reshape(-1)
        self.oriented = bool(oriented)
        self.name = name

        if validate:
            self._validate()

        for array in (self._vertices, self._faces, self._masses):
            array.setflags(write=False)

        self._edge_set: Optional[EdgeSet] = None
        self._rings: Optional[VertexRings] = None

    def _validate(self) -> None:
        n = len(self._vertices)
        if not np.all(np.isfinite(self._vertices)):
            raise MeshError(f"mesh '{self.name}' has non-finite vertex positions")
        if len(self._faces):
            if self._faces.min() < 0 or self._faces.max() >= n:
                raise MeshError(f"mesh '{self.name}' has face indices outside [0, {n})")
            f = self._faces
            repeated = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if np.any(repeated):
                raise MeshError(f"mesh '{self.name}' has degenerate face {int(np.flatnonzero(repeated)[0])} (repeated index)")
            areas = face_areas(self)
            small = np.flatnonzero(areas < AREA_TOLERANCE)
            if len(small):
                raise DegenerateFaceError(int(small[0]), float(areas[small[0]]))
        if self._masses.shape != (n,):
            raise MeshError(f"mesh '{self.name}' has {len(self._masses)} masses for {n} vertices")
        if not np.all(self._masses > 0):
            raise MeshError(f"mesh '{self.name}' has non-positive vertex masses")

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    @property
    def faces(self) -> np.ndarray:
        return self._faces

    @property
    def masses(self) -> np.ndarray:
        return self._masses

    @property
    def n_vertices(self) -> int:
        return len(self._vertices)

    @property
    def n_faces(self) -> int:
        return len(self._faces)

    @property
    def pinned(self) -> np.ndarray:
        """Mask of infinite-mass (kinematic) vertices."""
        return np.isinf(self._masses)

    @property
    def inverse_masses(self) -> np.ndarray:
        """1/m per vertex, 0 for pinned vertices."""
        return 1.0 / self._masses

    @property
    def edges(self) -> EdgeSet:
        if self._edge_set is None:
            self._edge_set = EdgeSet(self._faces)
        return self._edge_set

    @property
    def rings(self) -> VertexRings:
        if self._rings is None:
            self._rings = VertexRings(self.edges.edges, self.n_vertices)
        return self._rings

    def with_positions(self, positions: np.ndarray) -> "TriangleMesh":
        """
        Build a mesh with new vertex positions and the same everything else.

        Args:
            positions: (n, 3) array

        Returns:
            A new TriangleMesh sharing connectivity caches with this one
        """
        positions = np.asarray(positions, dtype=np.float64)
        if positions.shape != self._vertices.shape:
            raise MeshError(f"expected positions of shape {self._vertices.shape}, got {positions.shape}")
        mesh = TriangleMesh(positions, self._faces, self.oriented, self._masses, self.name, validate=False)
        mesh._edge_set = self._edge_set
        mesh._rings = self._rings
        return mesh

    def with_masses(self, masses: Union[np.ndarray, float]) -> "TriangleMesh":
        """Build a mesh with new per-vertex masses."""
        mesh = TriangleMesh(self._vertices, self._faces, self.oriented, masses, self.name, validate=False)
        if not np.all(mesh.masses > 0):
            raise MeshError(f"mesh '{self.name}' has non-positive vertex masses")
        mesh._edge_set = self._edge_set
        mesh._rings = self._rings
        return mesh

    def renamed(self, name: str, oriented: Optional[bool] = None) -> "TriangleMesh":
        """Build a copy with a different name and, optionally, orientation flag."""
        mesh = TriangleMesh(
            self._vertices, self._faces,
            self.oriented if oriented is None else oriented,
            self._masses, name, validate=False,
        )
        mesh._edge_set = self._edge_set
        mesh._rings = self._rings
        return mesh

    def __repr__(self) -> str:
        return f"TriangleMesh(name={self.name!r}, vertices={self.n_vertices}, faces={self.n_faces}, oriented={self.oriented})"


def _face_cross(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a = positions[faces[:, 0]]
    return np.cross(positions[faces[:, 1]] - a, positions[faces[:, 2]] - a)


def face_areas(mesh: TriangleMesh, positions: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-face areas in square meters."""
    positions = mesh.vertices if positions is None else positions
    return 0.5 * np.linalg.norm(_face_cross(positions, mesh.faces), axis=1)


def face_centroids(mesh: TriangleMesh, positions: Optional[np.ndarray] = None) -> np.ndarray:
    positions = mesh.vertices if positions is None else positions
    return positions[mesh.faces].mean(axis=1)


def face_normal(mesh: TriangleMesh, face: int) -> np.ndarray:
    """
    Unit normal of one face under the counterclockwise front-face convention.

    Args:
        mesh: The mesh
        face: Face index

    Returns:
        Unit 3-vector

    Raises:
        DegenerateFaceError: If the face area is below AREA_TOLERANCE
    """
    a, b, c = mesh.vertices[mesh.faces[face]]
    cross = np.cross(b - a, c - a)
    length = float(np.linalg.norm(cross))
    if 0.5 * length < AREA_TOLERANCE:
        raise DegenerateFaceError(face, 0.5 * length)
    return cross / length


def face_normals(mesh: TriangleMesh, positions: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Unit normals of every face.

    Raises:
        DegenerateFaceError: If any face area is below AREA_TOLERANCE
    """
    positions = mesh.vertices if positions is None else positions
    cross = _face_cross(positions, mesh.faces)
    lengths = np.linalg.norm(cross, axis=1)
    small = np.flatnonzero(0.5 * lengths < AREA_TOLERANCE)
    if len(small):
        raise DegenerateFaceError(int(small[0]), float(0.5 * lengths[small[0]]))
    return cross / lengths[:, None]


def enclosed_volume(mesh: TriangleMesh, positions: Optional[np.ndarray] = None) -> float:
    """
    Signed volume enclosed by a closed mesh (divergence theorem).

    Positive when faces are wound outward.

    Raises:
        OpenMeshError: If any edge does not have exactly two incident faces
    """
    if not mesh.edges.is_closed:
        raise OpenMeshError(f"mesh '{mesh.name}' is not closed; enclosed volume is undefined")
    positions = mesh.vertices if positions is None else positions
    a = positions[mesh.faces[:, 0]]
    b = positions[mesh.faces[:, 1]]
    c = positions[mesh.faces[:, 2]]
    return float(np.sum(a * np.cross(b, c)) / 6.0)


def lumped_masses(mesh: TriangleMesh, density: float) -> np.ndarray:
    """
    Per-vertex masses from a surface density.

    Each face's mass (density x area) is split equally among its three vertices.

    Args:
        mesh: The mesh
        density: Surface density in kg/m^2

    Returns:
        (n,) masses
    """
    masses = np.zeros(mesh.n_vertices)
    np.add.at(masses, mesh.faces.reshape(-1), np.repeat(face_areas(mesh) * density / 3.0, 3))
    isolated = masses <= 0
    if np.any(isolated):
        logger.warning(f"Mesh '{mesh.name}' has {int(isolated.sum())} vertices without faces; giving them the mean mass")
        masses[isolated] = masses[~isolated].mean() if np.any(~isolated) else density
    return masses


def load_obj(path: PathLike, oriented: bool = False, mass: float = 1.0, name: Optional[str] = None) -> TriangleMesh:
    """
    Read a triangle mesh from an ASCII OBJ file.

    Only `v` and `f` records are used; normals, texture coordinates, groups and
    materials are ignored. Face tokens may be `i`, `i/t`, `i//n` or `i/t/n`,
    with negative (relative) indices allowed.

    Args:
        path: File to read
        oriented: Orientation flag for the mesh
        mass: Uniform per-vertex mass
        name: Mesh identifier, defaults to the file stem

    Returns:
        The parsed mesh

    Raises:
        MeshError: On parse failure, a non-triangular face or an out-of-range index
    """
    path = Path(path)
    vertices: List[List[float]] = []
    faces: List[List[int]] = []
    face_lines: List[int] = []

    with open(path, "r") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            record = tokens[0]
            if record == "v":
                if len(tokens) < 4:
                    raise MeshError("vertex record needs three coordinates", line=lineno)
                try:
                    vertices.append([float(tokens[1]), float(tokens[2]), float(tokens[3])])
                except ValueError:
                    raise MeshError(f"invalid vertex coordinates {' '.join(tokens[1:4])!r}", line=lineno)
            elif record == "f":
                if len(tokens) != 4:
                    raise MeshError(f"non-triangular face ({len(tokens) - 1} vertices)", line=lineno)
                face = []
                for token in tokens[1:]:
                    try:
                        index = int(token.split("/")[0])
                    except ValueError:
                        raise MeshError(f"invalid face index {token!r}", line=lineno)
                    if index == 0:
                        raise MeshError("face index 0 is not valid in OBJ", line=lineno)
                    face.append(index - 1 if index > 0 else len(vertices) + index)
                faces.append(face)
                face_lines.append(lineno)

    if not faces:
        raise MeshError(f"{path} contains no faces")
    n = len(vertices)
    for face, lineno in zip(faces, face_lines):
        if min(face) < 0 or max(face) >= n:
            raise MeshError(f"face index out of range (mesh has {n} vertices)", line=lineno)

    mesh = TriangleMesh(vertices, faces, oriented=oriented, masses=mass, name=name or path.stem)
    logger.debug(f"Loaded {mesh} from {path}")
    return mesh


def save_obj(mesh: TriangleMesh, path: PathLike) -> None:
    """
    Write a mesh as ASCII OBJ with positions at 9 significant digits.

    Args:
        mesh: The mesh to write
        path: Destination file
    """
    lines = [f"# {mesh.name}: {mesh.n_vertices} vertices, {mesh.n_faces} faces"]
    lines.extend(f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices.tolist())
    lines.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist())
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    logger.debug(f"Wrote {mesh} to {path}")

