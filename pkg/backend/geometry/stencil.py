"""
Stencil Module for untangle

Turns edge-face intersections into penetration stencils: each intersecting
edge has one endpoint behind the crossed oriented face (illegal) and one in
front of it (legal). The illegal endpoint plus the three face corners form a
stencil {x0, x1, x2, x3}. Stencils sharing any vertex are grouped into impact
zones, one linear system each.

Vertices are addressed by VertexKey = (mesh name, vertex index) throughout.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.geometry.dcd import EdgeFaceIntersection
    from untangle.backend.geometry.errors import StencilError
    from untangle.backend.geometry.mesh import TriangleMesh, face_normal
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.geometry.dcd import EdgeFaceIntersection
    from backend.geometry.errors import StencilError
    from backend.geometry.mesh import TriangleMesh, face_normal

# Configure logging
logger = logging.getLogger("untangle.stencil")

VertexKey = Tuple[str, int]


class VertexLegality(str, Enum):
    LEGAL = "legal"
    ILLEGAL = "illegal"
    UNKNOWN = "unknown"


class VertexLegalityMap:
    """
    Legality of the endpoints of intersecting edges for one iteration.

    Vertices never marked are UNKNOWN. Once ILLEGAL, a vertex stays ILLEGAL.
    """

    def __init__(self):
        self._states: Dict[VertexKey, VertexLegality] = {}

    def mark(self, key: VertexKey, state: VertexLegality) -> None:
        if self._states.get(key) == VertexLegality.ILLEGAL:
            return
        self._states[key] = state

    def of(self, key: VertexKey) -> VertexLegality:
        return self._states.get(key, VertexLegality.UNKNOWN)

    def illegal(self) -> List[VertexKey]:
        return sorted(k for k, s in self._states.items() if s == VertexLegality.ILLEGAL)

    def legal(self) -> List[VertexKey]:
        return sorted(k for k, s in self._states.items() if s == VertexLegality.LEGAL)

    def counts(self) -> Dict[str, int]:
        counts = {state.value: 0 for state in (VertexLegality.LEGAL, VertexLegality.ILLEGAL)}
        for state in self._states.values():
            counts[state.value] += 1
        return counts

    def __len__(self) -> int:
        return len(self._states)

    def __contains__(self, key: VertexKey) -> bool:
        return key in self._states


@dataclass(frozen=True)
class PenetrationStencil:
    """
    An apex vertex on the back side of an oriented face.

    `normal` is the unit face normal when the stencil was built and stays
    frozen for the rest of the iteration; `distance` is
    normal . (x0 - (x1 + x2 + x3) / 3) at build time, negative.
    """

    apex: VertexKey
    face_mesh: str
    face_index: int
    face: Tuple[int, int, int]
    normal: Tuple[float, float, float]
    distance: float

    @property
    def key(self) -> Tuple[VertexKey, str, Tuple[int, ...]]:
        return self.apex, self.face_mesh, tuple(sorted(self.face))

    def vertex_keys(self) -> List[VertexKey]:
        """The four stencil vertices in local order x0, x1, x2, x3."""
        return [self.apex] + [(self.face_mesh, v) for v in self.face]

    def to_dict(self) -> Dict:
        return {
            "type": "stencil",
            "apex": {"mesh": self.apex[0], "vertex": self.apex[1]},
            "face": {"mesh": self.face_mesh, "index": self.face_index, "vertices": list(self.face)},
            "normal": list(self.normal),
            "distance": self.distance,
        }


@dataclass
class ImpactZone:
    """Stencils connected through shared vertices, plus their vertex support."""

    stencils: List[PenetrationStencil]
    support: List[VertexKey] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.stencils)


class DisjointSet:
    """Union-find over 0..n-1 with path compression and union by rank."""

    def __init__(self, size: int):
        self.parents = list(range(size))
        self.ranks = [0] * size

    def find(self, index: int) -> int:
        root = index
        while self.parents[root] != root:
            root = self.parents[root]
        while self.parents[index] != root:
            self.parents[index], index = root, self.parents[index]
        return root

    def merge(self, a: int, b: int) -> None:
        a, b = self.find(a), self.find(b)
        if a == b:
            return
        if self.ranks[a] < self.ranks[b]:
            a, b = b, a
        self.parents[b] = a
        if self.ranks[a] == self.ranks[b]:
            self.ranks[a] += 1

    def groups(self) -> List[List[int]]:
        """Members of every set, each list ascending, sets ordered by first member."""
        by_root: Dict[int, List[int]] = {}
        for index in range(len(self.parents)):
            by_root.setdefault(self.find(index), []).append(index)
        return sorted(by_root.values(), key=lambda members: members[0])


class _FaceFrames:
    """Per-face unit normal and centroid, computed on first use."""

    def __init__(self, meshes: Mapping[str, TriangleMesh]):
        self._meshes = meshes
        self._cache: Dict[Tuple[str, int], Tuple[np.ndarray, np.ndarray]] = {}

    def get(self, mesh_name: str, face: int) -> Tuple[np.ndarray, np.ndarray]:
        key = (mesh_name, face)
        if key not in self._cache:
            mesh = self._meshes[mesh_name]
            if not mesh.oriented:
                raise StencilError(f"intersection references face {face} of un-oriented mesh '{mesh_name}'")
            centroid = mesh.vertices[mesh.faces[face]].mean(axis=0)
            self._cache[key] = (face_normal(mesh, face), centroid)
        return self._cache[key]


def _signed_plane_distances(record: EdgeFaceIntersection, meshes: Mapping[str, TriangleMesh], frames: _FaceFrames):
    normal, centroid = frames.get(record.face_mesh, record.face_index)
    edge_mesh = meshes[record.edge_mesh]
    ends = edge_mesh.edges.edges[record.edge_index]
    distances = (edge_mesh.vertices[ends] - centroid) @ normal
    return ends, distances, normal


def classify_vertices(intersections: Sequence[EdgeFaceIntersection], meshes: Mapping[str, TriangleMesh]) -> VertexLegalityMap:
    """
    Classify the endpoints of every intersecting edge.

    An endpoint behind the crossed face (n . (v - centroid) < 0) is ILLEGAL,
    otherwise LEGAL; any ILLEGAL verdict wins over LEGAL ones.

    Args:
        intersections: Records from find_intersections
        meshes: Meshes by name

    Returns:
        The legality map; vertices off intersecting edges are UNKNOWN
    """
    legality = VertexLegalityMap()
    frames = _FaceFrames(meshes)
    for record in intersections:
        ends, distances, _ = _signed_plane_distances(record, meshes, frames)
        for vertex, distance in zip(ends.tolist(), distances.tolist()):
            state = VertexLegality.ILLEGAL if distance < 0.0 else VertexLegality.LEGAL
            legality.mark((record.edge_mesh, vertex), state)
    counts = legality.counts()
    logger.debug(f"Classified {len(legality)} vertices: {counts['illegal']} illegal, {counts['legal']} legal")
    return legality


def build_stencils(
    intersections: Sequence[EdgeFaceIntersection],
    meshes: Mapping[str, TriangleMesh],
    legality: Optional[VertexLegalityMap] = None,
) -> List[PenetrationStencil]:
    """
    Build one stencil per (illegal endpoint, crossed oriented face) pair.

    Exact duplicates (same apex, same face) collapse to one stencil.

    Args:
        intersections: Records from find_intersections
        meshes: Meshes by name
        legality: Result of classify_vertices for the same records (computed if omitted)

    Returns:
        Stencils sorted by (apex, face mesh, face index)

    Raises:
        StencilError: If a record's face belongs to an un-oriented mesh
    """
    if legality is None:
        legality = classify_vertices(intersections, meshes)
    frames = _FaceFrames(meshes)
    unique: Dict[Tuple, PenetrationStencil] = {}

    for record in intersections:
        ends, distances, normal = _signed_plane_distances(record, meshes, frames)
        back = int(np.argmin(distances))
        distance = float(distances[back])
        if distance >= 0.0:
            logger.debug(f"Skipping grazing crossing {record.edge_mesh}:{record.edge_index} / {record.face_mesh}:{record.face_index}")
            continue
        apex = (record.edge_mesh, int(ends[back]))
        if legality.of(apex) != VertexLegality.ILLEGAL:
            raise StencilError(f"stencil apex {apex} was not classified illegal")
        face = tuple(int(v) for v in meshes[record.face_mesh].faces[record.face_index])
        stencil = PenetrationStencil(
            apex=apex,
            face_mesh=record.face_mesh,
            face_index=record.face_index,
            face=face,
            normal=tuple(float(v) for v in normal),
            distance=distance,
        )
        unique.setdefault(stencil.key, stencil)

    stencils = sorted(unique.values(), key=lambda s: (s.apex, s.face_mesh, s.face_index))
    if len(stencils) < len(intersections):
        logger.debug(f"Built {len(stencils)} stencils from {len(intersections)} intersections")
    return stencils


def partition_impact_zones(stencils: Sequence[PenetrationStencil]) -> List[ImpactZone]:
    """
    Group stencils that share any vertex.

    Args:
        stencils: Deduplicated stencils

    Returns:
        Vertex-disjoint zones ordered by their smallest vertex key
    """
    sets = DisjointSet(len(stencils))
    owner: Dict[VertexKey, int] = {}
    for index, stencil in enumerate(stencils):
        for key in stencil.vertex_keys():
            if key in owner:
                sets.merge(owner[key], index)
            else:
                owner[key] = index

    zones = []
    for members in sets.groups():
        zone_stencils = [stencils[i] for i in members]
        support = sorted({key for s in zone_stencils for key in s.vertex_keys()})
        zones.append(ImpactZone(stencils=zone_stencils, support=support))
    zones.sort(key=lambda zone: zone.support[0])
    return zones


def write_stencils_jsonl(stencils: Iterable[PenetrationStencil], path: Union[str, Path], append: bool = False) -> int:
    """Write one JSON object per stencil; returns the count written."""
    count = 0
    with open(path, "a" if append else "w", newline="\n") as f:
        for stencil in stencils:
            f.write(json.dumps(stencil.to_dict()) + "\n")
            count += 1
    return count
