"""
Response Module for untangle

Per impact zone, finds the mass-weighted smallest displacement that puts every
stencil's apex at signed distance d from its (frozen) face plane:

    minimize ||x' - x||_M   subject to   G x' = d

with G the k x 3m matrix of constraint rows (+n, -n/3, -n/3, -n/3). The
stationary equations give

    x' = x - M^-1 G^T lambda,      (G M^-1 G^T) lambda = G x - d

Multipliers are unconstrained in sign; for a penetrating stencil lambda < 0.
Pinned (infinite-mass) vertices have M^-1 = 0 and never move.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse import linalg as spla

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.app.models import ZoneDiagnostics
    from untangle.backend.geometry.errors import ZoneConvergenceError
    from untangle.backend.geometry.stencil import ImpactZone, PenetrationStencil, VertexKey
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.app.models import ZoneDiagnostics
    from backend.geometry.errors import ZoneConvergenceError
    from backend.geometry.stencil import ImpactZone, PenetrationStencil, VertexKey

# Configure logging
logger = logging.getLogger("untangle.response")

# Zones with more rows than this use conjugate gradients
DENSE_LIMIT = 64
RESIDUAL_TARGET = 1e-10
# Largest relative residual of the unregularized system a solve may leave
CONSISTENCY_TARGET = 1e-6
REGULARIZATION = 1e-10
REFINEMENT_STEPS = 3
# Relative singular value cutoff of the least-squares fallback
RANK_CUTOFF = 1e-10
# A row left further than this above its target (m) is released by the fallback
RELEASE_TOLERANCE = 1e-8

Positions = Mapping[str, np.ndarray]
Masses = Mapping[str, np.ndarray]


@dataclass
class ConstraintRow:
    """
    One constraint gradient in local stencil form.

    blocks[j] multiplies the position of vertices[j]; the blocks sum to zero.
    """

    vertices: Tuple[VertexKey, VertexKey, VertexKey, VertexKey]
    blocks: np.ndarray
    distance: float

    def evaluate(self, positions: Positions) -> float:
        """row . x at the given positions."""
        return float(sum(self.blocks[j] @ positions[mesh][v] for j, (mesh, v) in enumerate(self.vertices)))

    @property
    def key(self) -> Tuple:
        return self.vertices, self.blocks.tobytes()


@dataclass
class ZoneSystem:
    """
    The multiplier system of one impact zone.

    `stencil_rows[i]` is the system row used for zone.stencils[i], or -1 when
    that stencil's row was dropped as immovable.
    """

    rows: List[ConstraintRow]
    support: List[VertexKey]
    inverse_masses: np.ndarray
    gradient: sp.csr_matrix
    gram: Union[np.ndarray, sp.csr_matrix]
    rhs: np.ndarray
    post_distance: np.ndarray
    regularization: float
    stencil_rows: List[int] = field(default_factory=list)
    dropped_duplicates: int = 0
    dropped_immovable: int = 0
    lambdas: Optional[np.ndarray] = None
    diagnostics: Optional[ZoneDiagnostics] = None

    @property
    def size(self) -> int:
        return len(self.rows)

    def dense_gram(self) -> np.ndarray:
        return self.gram.toarray() if sp.issparse(self.gram) else np.asarray(self.gram)

    def expand(self, lambdas: np.ndarray) -> np.ndarray:
        """
        Map system multipliers onto the zone's stencils.

        Stencils that share a system row split its multiplier evenly, so the
        summed correction matches the solved system.
        """
        rows = np.asarray(self.stencil_rows, dtype=np.int64)
        expanded = np.zeros(len(rows))
        kept = rows >= 0
        copies = np.bincount(rows[kept], minlength=self.size)
        expanded[kept] = np.asarray(lambdas)[rows[kept]] / copies[rows[kept]]
        return expanded


def signed_distance(stencil: PenetrationStencil, positions: Positions) -> float:
    """
    Signed distance of the apex from the face plane along the frozen normal.

    n . [x0 - (x1 + x2 + x3) / 3]
    """
    normal = np.asarray(stencil.normal)
    apex = positions[stencil.apex[0]][stencil.apex[1]]
    corners = positions[stencil.face_mesh][list(stencil.face)]
    return float(normal @ (apex - corners.mean(axis=0)))


def constraint_gradient(stencil: PenetrationStencil) -> ConstraintRow:
    """The constraint row (+n, -n/3, -n/3, -n/3) of a stencil."""
    normal = np.asarray(stencil.normal, dtype=np.float64)
    blocks = np.stack([normal, -normal / 3.0, -normal / 3.0, -normal / 3.0])
    return ConstraintRow(vertices=tuple(stencil.vertex_keys()), blocks=blocks, distance=stencil.distance)


def _per_stencil(values: Union[float, Sequence[float]], count: int) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64)
    if array.ndim == 0:
        return np.full(count, float(array))
    if array.shape != (count,):
        raise ValueError(f"expected {count} post-response distances, got {array.shape}")
    return array


def _gershgorin_condition(gram: Union[np.ndarray, sp.csr_matrix]) -> Optional[float]:
    if sp.issparse(gram):
        diagonal = gram.diagonal()
        radii = np.asarray(abs(gram).sum(axis=1)).reshape(-1) - np.abs(diagonal)
    else:
        diagonal = np.diag(gram)
        radii = np.abs(gram).sum(axis=1) - np.abs(diagonal)
    upper = float(np.max(diagonal + radii))
    lower = float(np.min(diagonal - radii))
    if lower <= 0.0:
        return None
    return upper / lower


def assemble_zone_system(
    zone: ImpactZone,
    positions: Positions,
    masses: Masses,
    post_distance: Union[float, Sequence[float]] = 0.0,
    drop_duplicates: bool = True,
) -> ZoneSystem:
    """
    Assemble (G M^-1 G^T) lambda = G x - d for a zone.

    Args:
        zone: The impact zone
        positions: Current positions by mesh name
        masses: Per-vertex masses by mesh name (numpy.inf for pinned)
        post_distance: d, scalar or one value per stencil (>= 0)
        drop_duplicates: Remove rows identical to an earlier row

    Returns:
        The assembled system
    """
    targets = _per_stencil(post_distance, len(zone.stencils))
    if np.any(targets < 0):
        raise ValueError("post-response distances must be non-negative")

    rows: List[ConstraintRow] = []
    row_targets: List[float] = []
    stencil_rows: List[int] = []
    seen: Dict[Tuple, int] = {}
    dropped_duplicates = dropped_immovable = 0

    for stencil, target in zip(zone.stencils, targets):
        row = constraint_gradient(stencil)
        key = (row.key, float(target))
        if drop_duplicates and key in seen:
            stencil_rows.append(seen[key])
            dropped_duplicates += 1
            continue
        inverse = [1.0 / masses[mesh][v] for mesh, v in row.vertices]
        if not any(inverse):
            logger.warning(f"Dropping stencil {stencil.apex} -> {stencil.face_mesh}:{stencil.face_index}: all vertices pinned")
            stencil_rows.append(-1)
            dropped_immovable += 1
            continue
        seen[key] = len(rows)
        stencil_rows.append(len(rows))
        rows.append(row)
        row_targets.append(float(target))

    support = sorted({key for row in rows for key in row.vertices})
    local = {key: index for index, key in enumerate(support)}
    inverse_masses = np.array([1.0 / masses[mesh][v] for mesh, v in support], dtype=np.float64)

    # Row i, vertex j -> columns 3j..3j+2, as in stiffness matrix assembly
    data, row_ids, col_ids = [], [], []
    for i, row in enumerate(rows):
        for j, key in enumerate(row.vertices):
            base = 3 * local[key]
            data.extend(row.blocks[j].tolist())
            row_ids.extend([i, i, i])
            col_ids.extend([base, base + 1, base + 2])
    k, m = len(rows), len(support)
    gradient = sp.csr_matrix((data, (row_ids, col_ids)), shape=(k, 3 * m))
    weights = sp.diags(np.repeat(inverse_masses, 3))
    gram = (gradient @ weights @ gradient.T).tocsr()
    if k <= DENSE_LIMIT:
        gram = gram.toarray()

    x = np.concatenate([positions[mesh][v] for mesh, v in support]) if m else np.zeros(0)
    current = gradient @ x
    post = np.asarray(row_targets, dtype=np.float64)
    trace = float(gram.diagonal().sum()) if k else 0.0

    return ZoneSystem(
        rows=rows,
        support=support,
        inverse_masses=inverse_masses,
        gradient=gradient,
        gram=gram,
        rhs=current - post,
        post_distance=post,
        regularization=REGULARIZATION * trace / k if k else 0.0,
        stencil_rows=stencil_rows,
        dropped_duplicates=dropped_duplicates,
        dropped_immovable=dropped_immovable,
    )


def _relative_residual(matrix, lambdas: np.ndarray, rhs: np.ndarray) -> float:
    scale = float(np.linalg.norm(rhs))
    return float(np.linalg.norm(rhs - matrix @ lambdas)) / scale if scale > 0 else 0.0


def solve_multipliers(system: ZoneSystem, zone_index: int = 0) -> np.ndarray:
    """
    Solve (A + sigma I) lambda = rhs for a zone system.

    Dense Cholesky (plus iterative refinement) up to DENSE_LIMIT rows,
    conjugate gradients above it with an iteration cap of 4k.

    Args:
        system: The assembled system; lambdas and diagnostics are stored on it
        zone_index: Index used in diagnostics

    Returns:
        The multipliers, one per system row

    Raises:
        ZoneConvergenceError: If the relative residual stays above RESIDUAL_TARGET,
            or the unregularized system is left above CONSISTENCY_TARGET
    """
    k = system.size
    diagnostics = ZoneDiagnostics(
        zone=zone_index,
        rows=k,
        dropped_duplicates=system.dropped_duplicates,
        dropped_immovable=system.dropped_immovable,
    )
    if k == 0 or not np.any(system.rhs):
        system.lambdas = np.zeros(k)
        system.diagnostics = diagnostics
        return system.lambdas

    diagnostics.condition_bound = _gershgorin_condition(system.gram)
    sigma = system.regularization

    if sp.issparse(system.gram):
        matrix = (system.gram + sigma * sp.identity(k, format="csr")).tocsr()
        diagnostics.solver = "cg"
        lambdas = np.zeros(k)
        for _ in range(2):
            lambdas, info = spla.cg(matrix, system.rhs, x0=lambdas, rtol=RESIDUAL_TARGET, atol=0.0, maxiter=4 * k)
            if _relative_residual(matrix, lambdas, system.rhs) < RESIDUAL_TARGET:
                break
    else:
        matrix = system.gram + sigma * np.eye(k)
        try:
            factor = la.cho_factor(matrix)
            diagnostics.solver = "cholesky"
            lambdas = la.cho_solve(factor, system.rhs)
            for _ in range(REFINEMENT_STEPS):
                if _relative_residual(matrix, lambdas, system.rhs) < RESIDUAL_TARGET:
                    break
                lambdas = lambdas + la.cho_solve(factor, system.rhs - matrix @ lambdas)
        except la.LinAlgError:
            diagnostics.solver = "lstsq"
            lambdas = la.lstsq(matrix, system.rhs)[0]

    diagnostics.residual = _relative_residual(matrix, lambdas, system.rhs)
    diagnostics.max_abs_multiplier = float(np.max(np.abs(lambdas)))
    # an inconsistent system is met by the regularized solve with huge multipliers
    unregularized = _relative_residual(system.gram, lambdas, system.rhs)
    diagnostics.converged = diagnostics.residual < RESIDUAL_TARGET and unregularized < CONSISTENCY_TARGET
    system.lambdas = lambdas
    system.diagnostics = diagnostics

    if not diagnostics.converged:
        raise ZoneConvergenceError(
            f"zone {zone_index}: relative residual {diagnostics.residual:.3e} (unregularized {unregularized:.3e}) after {diagnostics.solver} solve of {k} rows",
            diagnostics=diagnostics.model_dump(),
        )
    return lambdas


def relax_multipliers(system: ZoneSystem, zone_index: int = 0) -> np.ndarray:
    """
    Least-squares multipliers for a zone whose equality system has no solution.

    Happens when one movable side is asked to meet several targets it cannot
    meet together (a pinned apex pair under one face, or a vertex crossing
    many faces of a pinned body). Rows are read as lower bounds
    row . x' >= d: each round takes the minimum-norm least-squares solution of
    the active rows, then releases the rows it leaves above their target.
    Released rows keep a zero multiplier.

    Args:
        system: The assembled system; lambdas and diagnostics are replaced
        zone_index: Index used in diagnostics

    Returns:
        The multipliers, one per system row
    """
    k = system.size
    gram = system.dense_gram()
    active = np.ones(k, dtype=bool)
    lambdas = np.zeros(k)
    for _ in range(k):
        rows = np.flatnonzero(active)
        lambdas = np.zeros(k)
        lambdas[rows] = la.lstsq(gram[np.ix_(rows, rows)], system.rhs[rows], cond=RANK_CUTOFF)[0]
        # row . x' - d after the correction
        slack = system.rhs - gram @ lambdas
        released = active & (slack > RELEASE_TOLERANCE)
        if not np.any(released):
            break
        if np.all(released[rows]):
            released = np.zeros(k, dtype=bool)
            released[rows[np.argmax(slack[rows])]] = True
        active &= ~released

    rows = np.flatnonzero(active)
    diagnostics = (system.diagnostics or ZoneDiagnostics(zone=zone_index, rows=k)).model_copy()
    diagnostics.solver = f"{diagnostics.solver}+active-set"
    diagnostics.released_rows = int(k - len(rows))
    diagnostics.residual = _relative_residual(gram[np.ix_(rows, rows)], lambdas[rows], system.rhs[rows])
    diagnostics.max_abs_multiplier = float(np.max(np.abs(lambdas))) if k else 0.0
    diagnostics.converged = diagnostics.residual < RESIDUAL_TARGET
    system.lambdas = lambdas
    system.diagnostics = diagnostics
    logger.debug(f"Zone {zone_index}: released {diagnostics.released_rows} of {k} rows, residual {diagnostics.residual:.2e}")
    return lambdas


def zone_corrections(zone: ImpactZone, lambdas: Sequence[float], masses: Masses) -> Dict[VertexKey, np.ndarray]:
    """
    Per-vertex corrections -M^-1 G^T lambda for a zone.

    Args:
        zone: The impact zone
        lambdas: One multiplier per zone stencil
        masses: Per-vertex masses by mesh name

    Returns:
        Correction vectors for every support vertex
    """
    corrections = {key: np.zeros(3) for key in zone.support}
    for stencil, lam in zip(zone.stencils, lambdas):
        if lam == 0.0:
            continue
        row = constraint_gradient(stencil)
        for block, key in zip(row.blocks, row.vertices):
            corrections[key] -= (lam / masses[key[0]][key[1]]) * block
    return corrections


def apply_displacements(zone: ImpactZone, lambdas: Sequence[float], positions: Positions, masses: Masses) -> Dict[str, np.ndarray]:
    """
    x'_v = x_v - (1/m_v) sum_i lambda_i block_{i,v} for every support vertex.

    Args:
        zone: The impact zone
        lambdas: One multiplier per zone stencil
        positions: Positions by mesh name (not modified)
        masses: Per-vertex masses by mesh name

    Returns:
        New positions by mesh name; vertices outside the support are unchanged
    """
    updated = {name: np.array(array, dtype=np.float64, copy=True) for name, array in positions.items()}
    for (mesh, vertex), delta in zone_corrections(zone, lambdas, masses).items():
        updated[mesh][vertex] += delta
    return updated


@dataclass
class ZoneSolution:
    lambdas: np.ndarray
    corrections: Dict[VertexKey, np.ndarray]
    diagnostics: ZoneDiagnostics
    system: ZoneSystem


def solve_zone(
    zone: ImpactZone, positions: Positions, masses: Masses, post_distance: Union[float, Sequence[float]] = 0.0, zone_index: int = 0
) -> ZoneSolution:
    """
    Assemble and solve one zone, returning per-stencil multipliers and corrections.

    A system the direct solve cannot meet falls back to relax_multipliers;
    diagnostics.converged then reports whether the kept rows were met.
    """
    system = assemble_zone_system(zone, positions, masses, post_distance)
    try:
        lambdas = solve_multipliers(system, zone_index)
    except ZoneConvergenceError as e:
        logger.info(f"{str(e)}; falling back to least squares")
        lambdas = relax_multipliers(system, zone_index)
    lambdas = system.expand(lambdas)
    logger.debug(f"Zone {zone_index}: {system.size} rows, residual {system.diagnostics.residual:.2e}")
    return ZoneSolution(
        lambdas=lambdas,
        corrections=zone_corrections(zone, lambdas, masses),
        diagnostics=system.diagnostics,
        system=system,
    )


def zone_response(
    zone: ImpactZone, positions: Positions, masses: Masses, post_distance: Union[float, Sequence[float]] = 0.0
) -> Dict[str, np.ndarray]:
    """
    Assemble, solve and apply one zone.

    Returns:
        New positions; every converged row satisfies row . x' = d under the frozen
        normals, and rows released by the least-squares fallback end above d
    """
    solution = solve_zone(zone, positions, masses, post_distance)
    return apply_displacements(zone, solution.lambdas, positions, masses)
