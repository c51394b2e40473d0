"""
Discrete Collision Detection Module for untangle

This module finds every crossing between the edges of one mesh and the faces of
another at a single instant. Broad phase: one bounding volume hierarchy over the
edge boxes and one over the face boxes, descended together. Narrow phase: a
vectorized segment/triangle test shared with the brute-force oracle, so both
paths report bit-identical records.

Tolerance policy:
- boxes are inflated by Tolerances.box before any overlap test
- a hit must satisfy Tolerances.param < t < 1 - Tolerances.param (endpoint
  grazing is not a crossing)
- barycentric coordinates may be as low as -Tolerances.bary (edge-inclusive)
- an edge lying in the face plane is not a crossing
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.app.models import Tolerances
    from untangle.backend.geometry.errors import BvhError, OrientationError
    from untangle.backend.geometry.mesh import TriangleMesh
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.app.models import Tolerances
    from backend.geometry.errors import BvhError, OrientationError
    from backend.geometry.mesh import TriangleMesh

# Configure logging
logger = logging.getLogger("untangle.dcd")

# Pairs per narrow-phase batch
_CHUNK = 65536


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box with min corner `lower` and max corner `upper`."""

    lower: Tuple[float, float, float]
    upper: Tuple[float, float, float]

    @classmethod
    def from_points(cls, points: np.ndarray) -> "Aabb":
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return cls(tuple(points.min(axis=0).tolist()), tuple(points.max(axis=0).tolist()))

    def inflated(self, margin: float) -> "Aabb":
        return Aabb(tuple(v - margin for v in self.lower), tuple(v + margin for v in self.upper))

    def overlaps(self, other: "Aabb") -> bool:
        return all(a <= d and c <= b for a, b, c, d in zip(self.lower, self.upper, other.lower, other.upper))

    def contains(self, other: "Aabb") -> bool:
        return all(a <= c for a, c in zip(self.lower, other.lower)) and all(d <= b for b, d in zip(self.upper, other.upper))


class Bvh:
    """
    Binary bounding volume hierarchy stored as flat arrays.

    Node 0 is the root. Leaves hold exactly one primitive (`primitive[node] >= 0`);
    internal nodes have `primitive[node] == -1` and two children.
    """

    def __init__(self, lower: np.ndarray, upper: np.ndarray, left: np.ndarray, right: np.ndarray, primitive: np.ndarray):
        self.lower = lower
        self.upper = upper
        self.left = left
        self.right = right
        self.primitive = primitive

    def __len__(self) -> int:
        return len(self.primitive)

    @property
    def n_primitives(self) -> int:
        return int(np.count_nonzero(self.primitive >= 0))

    def is_leaf(self, node: int) -> bool:
        return self.primitive[node] >= 0

    def node_box(self, node: int) -> Aabb:
        return Aabb(tuple(self.lower[node].tolist()), tuple(self.upper[node].tolist()))

    def leaves(self) -> List[int]:
        return np.flatnonzero(self.primitive >= 0).tolist()

    def _overlaps(self, node: int, lower: np.ndarray, upper: np.ndarray) -> bool:
        return bool(np.all(self.lower[node] <= upper) and np.all(lower <= self.upper[node]))

    def query(self, box: Aabb) -> List[int]:
        """Primitive indices whose boxes overlap a query box, in ascending order."""
        lower, upper = np.asarray(box.lower), np.asarray(box.upper)
        hits = []
        stack = [0]
        while stack:
            node = stack.pop()
            if not self._overlaps(node, lower, upper):
                continue
            if self.primitive[node] >= 0:
                hits.append(int(self.primitive[node]))
            else:
                stack.append(self.left[node])
                stack.append(self.right[node])
        return sorted(hits)

    def query_point(self, point: Sequence[float]) -> List[int]:
        """Primitive indices whose boxes contain a point."""
        point = tuple(float(v) for v in point)
        return self.query(Aabb(point, point))

    def overlapping_pairs(self, other: "Bvh") -> Tuple[np.ndarray, np.ndarray]:
        """
        All (primitive of self, primitive of other) pairs with overlapping leaf boxes.

        Args:
            other: The second hierarchy

        Returns:
            Two index arrays of equal length
        """
        mine: List[int] = []
        theirs: List[int] = []
        stack = [(0, 0)]
        while stack:
            a, b = stack.pop()
            if not (np.all(self.lower[a] <= other.upper[b]) and np.all(other.lower[b] <= self.upper[a])):
                continue
            a_leaf = self.primitive[a] >= 0
            b_leaf = other.primitive[b] >= 0
            if a_leaf and b_leaf:
                mine.append(int(self.primitive[a]))
                theirs.append(int(other.primitive[b]))
            elif b_leaf or (not a_leaf and _volume(self, a) >= _volume(other, b)):
                stack.append((self.left[a], b))
                stack.append((self.right[a], b))
            else:
                stack.append((a, other.left[b]))
                stack.append((a, other.right[b]))
        return np.asarray(mine, dtype=np.int64), np.asarray(theirs, dtype=np.int64)


def _volume(tree: Bvh, node: int) -> float:
    extent = tree.upper[node] - tree.lower[node]
    return float(extent[0] * extent[1] * extent[2])


def _box_arrays(primitives: Union[np.ndarray, Sequence[Aabb]]) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(primitives, np.ndarray):
        boxes = np.asarray(primitives, dtype=np.float64).reshape(-1, 2, 3)
        return boxes[:, 0, :].copy(), boxes[:, 1, :].copy()
    lower = np.array([box.lower for box in primitives], dtype=np.float64).reshape(-1, 3)
    upper = np.array([box.upper for box in primitives], dtype=np.float64).reshape(-1, 3)
    return lower, upper


def build_bvh(primitives: Union[np.ndarray, Sequence[Aabb]]) -> Bvh:
    """
    Build a hierarchy by median split on the longest axis of each node box.

    Args:
        primitives: Either a list of Aabb or an (n, 2, 3) array of
            [lower, upper] corners

    Returns:
        The hierarchy; primitive i sits in exactly one leaf

    Raises:
        BvhError: If no primitives are given
    """
    lower, upper = _box_arrays(primitives)
    count = len(lower)
    if count == 0:
        raise BvhError("cannot build a bounding volume hierarchy over zero primitives")

    capacity = 2 * count - 1
    node_lower = np.empty((capacity, 3))
    node_upper = np.empty((capacity, 3))
    left = np.full(capacity, -1, dtype=np.int64)
    right = np.full(capacity, -1, dtype=np.int64)
    primitive = np.full(capacity, -1, dtype=np.int64)
    centers = 0.5 * (lower + upper)

    next_node = 1
    stack = [(0, np.arange(count))]
    while stack:
        node, members = stack.pop()
        box_lower = lower[members].min(axis=0)
        box_upper = upper[members].max(axis=0)
        node_lower[node] = box_lower
        node_upper[node] = box_upper
        if len(members) == 1:
            primitive[node] = members[0]
            continue
        axis = int(np.argmax(box_upper - box_lower))
        ordered = members[np.argsort(centers[members, axis], kind="stable")]
        half = len(ordered) // 2
        left[node], right[node] = next_node, next_node + 1
        next_node += 2
        stack.append((left[node], ordered[:half]))
        stack.append((right[node], ordered[half:]))

    return Bvh(node_lower, node_upper, left, right, primitive)


@dataclass(frozen=True)
class EdgeFaceIntersection:
    """
    One crossing of a mesh edge through a triangle of another mesh.

    The hit point equals p + t (q - p) for the edge endpoints (p, q) in edge
    order, and b1 x1 + b2 x2 + b3 x3 for the face corners.
    """

    edge_mesh: str
    edge_index: int
    face_mesh: str
    face_index: int
    t: float
    barycentric: Tuple[float, float, float]
    point: Tuple[float, float, float]

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record["barycentric"] = list(self.barycentric)
        record["point"] = list(self.point)
        return record


def _dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1] + u[:, 2] * v[:, 2]


def _cross(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.stack([
        u[:, 1] * v[:, 2] - u[:, 2] * v[:, 1],
        u[:, 2] * v[:, 0] - u[:, 0] * v[:, 2],
        u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0],
    ], axis=1)


def segment_triangle_batch(
    p: np.ndarray, q: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray, tolerances: Optional[Tolerances] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorized segment/triangle crossing test.

    Args:
        p, q: (k, 3) segment endpoints
        a, b, c: (k, 3) triangle corners
        tolerances: Tolerance set (defaults when omitted)

    Returns:
        (hit mask (k,), t (k,), barycentrics (k, 3)); t and barycentrics are
        only meaningful where hit is True
    """
    tol = tolerances or Tolerances()
    normal = _cross(b - a, c - a)
    dp = _dot(normal, p - a)
    dq = _dot(normal, q - a)
    crossing = dp * dq < 0.0

    denom = np.where(crossing, dp - dq, 1.0)
    t = np.where(crossing, dp / denom, 0.0)
    x = p + t[:, None] * (q - p)
    nn = _dot(normal, normal)
    nn = np.where(nn > 0.0, nn, 1.0)
    b1 = _dot(normal, _cross(b - x, c - x)) / nn
    b2 = _dot(normal, _cross(c - x, a - x)) / nn
    b3 = 1.0 - b1 - b2

    hit = (
        crossing
        & (t > tol.param) & (t < 1.0 - tol.param)
        & (b1 >= -tol.bary) & (b2 >= -tol.bary) & (b3 >= -tol.bary)
    )
    return hit, t, np.stack([b1, b2, b3], axis=1)


def segment_triangle_intersect(
    p: Sequence[float], q: Sequence[float], a: Sequence[float], b: Sequence[float], c: Sequence[float],
    tolerances: Optional[Tolerances] = None,
) -> Optional[Tuple[float, float, float, float]]:
    """
    Test whether segment pq crosses triangle abc.

    Args:
        p, q: Segment endpoints
        a, b, c: Triangle corners (non-degenerate)
        tolerances: Tolerance set

    Returns:
        (t, b1, b2, b3) for a crossing, otherwise None
    """
    rows = [np.asarray(v, dtype=np.float64).reshape(1, 3) for v in (p, q, a, b, c)]
    hit, t, bary = segment_triangle_batch(*rows, tolerances=tolerances)
    if not hit[0]:
        return None
    return float(t[0]), float(bary[0, 0]), float(bary[0, 1]), float(bary[0, 2])


def _edge_boxes(mesh: TriangleMesh, margin: float) -> np.ndarray:
    ends = mesh.vertices[mesh.edges.edges]
    return np.stack([ends.min(axis=1) - margin, ends.max(axis=1) + margin], axis=1)


def _face_boxes(mesh: TriangleMesh, margin: float) -> np.ndarray:
    corners = mesh.vertices[mesh.faces]
    return np.stack([corners.min(axis=1) - margin, corners.max(axis=1) + margin], axis=1)


def _narrow_phase(
    edge_mesh: TriangleMesh, face_mesh: TriangleMesh, edge_ids: np.ndarray, face_ids: np.ndarray,
    tolerances: Tolerances, threads: int,
) -> List[EdgeFaceIntersection]:
    edges = edge_mesh.edges.edges
    faces = face_mesh.faces
    ev, fv = edge_mesh.vertices, face_mesh.vertices

    def run(span: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        lo, hi = span
        e, f = edge_ids[lo:hi], face_ids[lo:hi]
        p, q = ev[edges[e, 0]], ev[edges[e, 1]]
        hit, t, bary = segment_triangle_batch(p, q, fv[faces[f, 0]], fv[faces[f, 1]], fv[faces[f, 2]], tolerances)
        points = p[hit] + t[hit, None] * (q[hit] - p[hit])
        return e[hit], f[hit], t[hit], bary[hit], points

    spans = [(lo, min(lo + _CHUNK, len(edge_ids))) for lo in range(0, len(edge_ids), _CHUNK)]
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, spans))
    else:
        parts = [run(span) for span in spans]

    records = []
    for e, f, t, bary, points in parts:
        for k in range(len(e)):
            records.append(EdgeFaceIntersection(
                edge_mesh=edge_mesh.name,
                edge_index=int(e[k]),
                face_mesh=face_mesh.name,
                face_index=int(f[k]),
                t=float(t[k]),
                barycentric=(float(bary[k, 0]), float(bary[k, 1]), float(bary[k, 2])),
                point=(float(points[k, 0]), float(points[k, 1]), float(points[k, 2])),
            ))
    records.sort(key=lambda r: (r.edge_index, r.face_index))
    return records


def _detect(
    edge_mesh: TriangleMesh, face_mesh: TriangleMesh, tolerances: Optional[Tolerances], threads: int,
    skip_shared_vertices: bool = False,
) -> List[EdgeFaceIntersection]:
    tol = tolerances or Tolerances()
    if len(edge_mesh.edges) == 0 or face_mesh.n_faces == 0:
        return []
    edge_box = Aabb.from_points(edge_mesh.vertices).inflated(tol.box)
    if not edge_box.overlaps(Aabb.from_points(face_mesh.vertices).inflated(tol.box)):
        return []
    edge_tree = build_bvh(_edge_boxes(edge_mesh, tol.box))
    face_tree = build_bvh(_face_boxes(face_mesh, tol.box))
    edge_ids, face_ids = edge_tree.overlapping_pairs(face_tree)
    if skip_shared_vertices and len(edge_ids):
        ends = edge_mesh.edges.edges[edge_ids]
        corners = face_mesh.faces[face_ids]
        shared = (corners == ends[:, [0]]).any(axis=1) | (corners == ends[:, [1]]).any(axis=1)
        edge_ids, face_ids = edge_ids[~shared], face_ids[~shared]
    logger.debug(f"Broad phase {edge_mesh.name} x {face_mesh.name}: {len(edge_ids)} candidate pairs")
    return _narrow_phase(edge_mesh, face_mesh, edge_ids, face_ids, tol, threads)


def find_intersections(
    edge_mesh: TriangleMesh, face_mesh: TriangleMesh, tolerances: Optional[Tolerances] = None, threads: int = 1
) -> List[EdgeFaceIntersection]:
    """
    Find every crossing of an edge of edge_mesh through a face of face_mesh.

    Args:
        edge_mesh: Mesh supplying the segments
        face_mesh: Oriented mesh supplying the triangles
        tolerances: Tolerance set
        threads: Narrow-phase worker count (results do not depend on it)

    Returns:
        Records sorted by (edge index, face index)
    """
    if not face_mesh.oriented:
        raise OrientationError(f"face mesh '{face_mesh.name}' must be oriented")
    records = _detect(edge_mesh, face_mesh, tolerances, threads)
    logger.debug(f"Found {len(records)} edge-face intersections ({edge_mesh.name} edges, {face_mesh.name} faces)")
    return records


def find_intersections_brute_force(
    edge_mesh: TriangleMesh, face_mesh: TriangleMesh, tolerances: Optional[Tolerances] = None
) -> List[EdgeFaceIntersection]:
    """Exhaustive O(E x F) reference for find_intersections (no box culling)."""
    tol = tolerances or Tolerances()
    n_edges, n_faces = len(edge_mesh.edges), face_mesh.n_faces
    edge_ids = np.repeat(np.arange(n_edges, dtype=np.int64), n_faces)
    face_ids = np.tile(np.arange(n_faces, dtype=np.int64), n_edges)
    return _narrow_phase(edge_mesh, face_mesh, edge_ids, face_ids, tol, threads=1)


def find_self_intersections(mesh: TriangleMesh, tolerances: Optional[Tolerances] = None, threads: int = 1) -> List[EdgeFaceIntersection]:
    """
    Edges of a mesh crossing its own faces, ignoring pairs that share a vertex.

    Report-only: nothing in the pipeline resolves these.
    """
    return _detect(mesh, mesh, tolerances, threads, skip_shared_vertices=True)


def write_intersections_jsonl(records: Iterable[EdgeFaceIntersection], path: Union[str, Path]) -> int:
    """
    Write one JSON object per record.

    Returns:
        Number of records written
    """
    count = 0
    with open(path, "w", newline="\n") as f:
        for record in records:
            f.write(json.dumps({"type": "intersection", **record.to_dict()}) + "\n")
            count += 1
    return count
