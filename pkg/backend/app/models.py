"""
Configuration and report models for untangle.

Pydantic models for everything that crosses a boundary: algorithm
configuration handed in by the CLI or a scene file, and the per-iteration and
per-run reports written out as JSON.
"""

from enum import Enum
from typing import Any, Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

REPORT_SCHEMA_VERSION = 1


class Tolerances(BaseModel):
    """Tolerances of the discrete collision test."""

    model_config = ConfigDict(frozen=True)

    box: float = Field(1e-6, ge=0.0, description="Bounding box inflation (m)")
    bary: float = Field(1e-9, ge=0.0, description="Barycentric slack")
    param: float = Field(1e-9, ge=0.0, lt=0.5, description="Segment parameter slack")


class DiffusionConfig(BaseModel):
    rings: int = Field(2, ge=0, description="Ring radius of the diffusion region")
    iters: int = Field(20, ge=0, description="Maximum Jacobi sweeps")
    tol: float = Field(1e-9, ge=0.0, description="Early stop when the largest sweep change falls below this (m)")


class UntangleConfig(BaseModel):
    """Settings of the detect / relocate / diffuse loop."""

    post_distance: float = Field(0.0, ge=0.0, description="Target signed distance d after response (m)")
    max_iters: int = Field(50, ge=1)
    diffusion: DiffusionConfig = Field(default_factory=DiffusionConfig)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    alternate_orientation: bool = True
    oscillation_damping: bool = False
    damping_factor: float = Field(0.5, gt=0.0, le=1.0)
    threads: int = Field(1, ge=1)
    report_self_intersections: bool = False
    snapshot_every: Optional[int] = Field(None, ge=1)
    snapshot_dir: Optional[str] = None


class ZoneDiagnostics(BaseModel):
    """Solve diagnostics of one impact zone."""

    zone: int
    rows: int
    dropped_duplicates: int = 0
    dropped_immovable: int = 0
    condition_bound: Optional[float] = None
    residual: float = 0.0
    max_abs_multiplier: float = 0.0
    solver: str = "none"
    released_rows: int = 0
    converged: bool = True


class IterationStats(BaseModel):
    iteration: int
    face_meshes: List[str] = Field(default_factory=list)
    intersection_count: int = 0
    illegal_vertex_count: int = 0
    stencil_count: int = 0
    zone_count: int = 0
    max_abs_distance: float = 0.0
    relaxed_zones: int = 0
    unconverged_zones: int = 0
    damping: float = 1.0
    self_intersections: Optional[int] = None
    zones: List[ZoneDiagnostics] = Field(default_factory=list)
    phase_seconds: Dict[str, float] = Field(default_factory=dict)


class UntangleStatus(str, Enum):
    RESOLVED = "Resolved"
    EXHAUSTED = "IterationBudgetExhausted"


class UntangleReport(BaseModel):
    """Outcome of one untangle run."""

    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(REPORT_SCHEMA_VERSION, alias="schema")
    meshes: List[str]
    status: UntangleStatus
    iterations: List[IterationStats] = Field(default_factory=list)
    final_intersection_count: int = 0
    phase_seconds: Dict[str, float] = Field(default_factory=dict)
    config: UntangleConfig = Field(default_factory=UntangleConfig)

    @property
    def resolved(self) -> bool:
        return self.status == UntangleStatus.RESOLVED

    def to_json(self, indent: int = 2) -> str:
        return self.model_dump_json(by_alias=True, indent=indent)

    def to_frame(self) -> pd.DataFrame:
        """Per-iteration counts as a DataFrame (one row per iteration)."""
        columns = [
            "iteration", "intersection_count", "illegal_vertex_count", "stencil_count",
            "zone_count", "relaxed_zones", "unconverged_zones", "max_abs_distance", "damping",
        ]
        rows = [{column: getattr(stats, column) for column in columns} for stats in self.iterations]
        return pd.DataFrame(rows, columns=columns)


class FrameRecord(BaseModel):
    """One written simulation frame."""

    index: int
    step: int
    time: float
    crossings: int
    illegal_vertices: int = 0
    centroids: Dict[str, List[float]] = Field(default_factory=dict)
    files: List[str] = Field(default_factory=list)


class UntangleCall(BaseModel):
    """Summary of one untangle invocation during a simulation."""

    step: int
    meshes: List[str]
    status: UntangleStatus
    iterations: int
    initial_intersections: int
    final_intersection_count: int


class ScenarioResult(BaseModel):
    """Outcome of a simulation run."""

    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(REPORT_SCHEMA_VERSION, alias="schema")
    scene: str
    steps: int
    frames: List[FrameRecord] = Field(default_factory=list)
    untangle_calls: List[UntangleCall] = Field(default_factory=list)
    phase_seconds: Dict[str, float] = Field(default_factory=dict)
    metrics: Dict[str, Any] = Field(default_factory=dict)

    def to_json(self, indent: int = 2) -> str:
        return self.model_dump_json(by_alias=True, indent=indent)

    def crossing_counts(self) -> List[int]:
        return [frame.crossings for frame in self.frames]

    def illegal_counts(self) -> List[int]:
        return [frame.illegal_vertices for frame in self.frames]
