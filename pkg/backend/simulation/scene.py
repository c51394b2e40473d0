"""
Scene Module for untangle

Loads simulation scenes from JSON, validates them against scene_schema.json
and builds the meshes they describe. Validation failures are reported as
SceneConfigError with the dotted path of the offending field.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import jsonschema
import numpy as np
from pydantic import BaseModel, Field, ValidationError

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.app.config import settings
    from untangle.backend.app.models import UntangleConfig
    from untangle.backend.geometry.errors import MeshError, SceneConfigError
    from untangle.backend.geometry.mesh import TriangleMesh, load_obj, lumped_masses
    from untangle.backend.geometry.primitives import PRIMITIVES, translated
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.app.config import settings
    from backend.app.models import UntangleConfig
    from backend.geometry.errors import MeshError, SceneConfigError
    from backend.geometry.mesh import TriangleMesh, load_obj, lumped_masses
    from backend.geometry.primitives import PRIMITIVES, translated

# Configure logging
logger = logging.getLogger("untangle.scene")

SCHEMA_PATH = os.path.join(os.path.dirname(__file__), "scene_schema.json")
SCENES_DIR = os.path.join(os.path.dirname(__file__), "scenes")

Vector = Tuple[float, float, float]


class PrimitiveSpec(BaseModel):
    kind: Literal["cube", "icosahedron", "icosphere", "torus", "sheet", "spike"]
    params: Dict[str, Any] = Field(default_factory=dict)


class MeshSpec(BaseModel):
    """One body of a scene."""

    name: str
    path: Optional[str] = None
    primitive: Optional[PrimitiveSpec] = None
    oriented: bool = False
    translate: Vector = (0.0, 0.0, 0.0)
    initial_velocity: Vector = (0.0, 0.0, 0.0)
    gravity_scale: float = 1.0
    vertex_mass: Optional[float] = Field(None, gt=0.0)
    density: Optional[float] = Field(None, gt=0.0)
    pinned: Union[Literal["all"], List[int]] = Field(default_factory=list)
    stiffness: float = Field(0.0, ge=0.0)
    damping: float = Field(0.0, ge=0.0)
    pressure: float = Field(0.0, ge=0.0)


class SceneConfig(BaseModel):
    """A validated simulation scene."""

    name: str
    dt: float = Field(0.005, gt=0.0)
    steps: int = Field(..., ge=1)
    gravity: Vector = (0.0, 0.0, -9.8)
    collision_interval: int = Field(1, ge=1)
    collision_start_step: int = Field(0, ge=0)
    output_interval: int = Field(8, ge=1)
    output_dir: Optional[str] = None
    untangle: UntangleConfig = Field(default_factory=UntangleConfig)
    meshes: List[MeshSpec] = Field(..., min_length=1)

    # Directory that relative mesh paths resolve against
    base_dir: Optional[str] = Field(None, exclude=True)

    def with_frames(self, frames: int) -> "SceneConfig":
        """Copy whose step count yields exactly `frames` output frames."""
        return self.model_copy(update={"steps": frames * self.output_interval})


_schema: Optional[Dict[str, Any]] = None


def _load_schema() -> Dict[str, Any]:
    global _schema
    if _schema is None:
        with open(SCHEMA_PATH, "r") as f:
            _schema = json.load(f)
        logger.debug(f"Loaded scene schema from {SCHEMA_PATH}")
    return _schema


def _dotted(path) -> str:
    return ".".join(str(part) for part in path)


def validate_scene(document: Dict[str, Any]) -> None:
    """
    Validate a scene document against the scene schema.

    Raises:
        SceneConfigError: With the dotted path of the most relevant violation
    """
    validator = jsonschema.Draft7Validator(_load_schema())
    error = jsonschema.exceptions.best_match(validator.iter_errors(document))
    if error is not None:
        field_path = _dotted(error.absolute_path) or "(root)"
        logger.error(f"Scene validation error at {field_path}: {error.message}")
        raise SceneConfigError(error.message, field_path=field_path)

    names = [mesh["name"] for mesh in document["meshes"]]
    for index, name in enumerate(names):
        if name in names[:index]:
            raise SceneConfigError(f"duplicate mesh name '{name}'", field_path=f"meshes.{index}.name")


def parse_scene(document: Dict[str, Any], base_dir: Optional[str] = None) -> SceneConfig:
    """
    Validate a scene document and turn it into a SceneConfig.

    Args:
        document: Parsed JSON document
        base_dir: Directory relative mesh paths resolve against

    Returns:
        The scene

    Raises:
        SceneConfigError: If the document is invalid
    """
    if not isinstance(document, dict):
        raise SceneConfigError("scene must be a JSON object", field_path="(root)")
    validate_scene(document)
    try:
        scene = SceneConfig.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise SceneConfigError(first["msg"], field_path=_dotted(first["loc"]))
    scene.base_dir = base_dir
    return scene


def load_scene(path: Union[str, Path]) -> SceneConfig:
    """
    Load and validate a scene file.

    Args:
        path: JSON scene file

    Returns:
        The scene

    Raises:
        SceneConfigError: If the file is not valid JSON or fails validation
        OSError: If the file cannot be read
    """
    path = Path(path)
    with open(path, "r") as f:
        text = f.read()
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneConfigError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}", field_path="(root)")
    scene = parse_scene(document, base_dir=str(path.parent))
    logger.debug(f"Loaded scene '{scene.name}' from {path}")
    return scene


def shipped_scene_path(name: str) -> str:
    """
    Path of a named scene (spike_sheet, two_tori, interval_sweep).

    A file of that name in UNTANGLE_SCENE_DIR takes precedence over the copy
    shipped with the package.
    """
    if settings.UNTANGLE_SCENE_DIR:
        candidate = os.path.join(settings.UNTANGLE_SCENE_DIR, f"{name}.json")
        if os.path.exists(candidate):
            return candidate
    return os.path.join(SCENES_DIR, f"{name}.json")


def _pinned_mask(spec: MeshSpec, n_vertices: int, index: int) -> np.ndarray:
    mask = np.zeros(n_vertices, dtype=bool)
    if spec.pinned == "all":
        mask[:] = True
    elif spec.pinned:
        pinned = np.asarray(spec.pinned, dtype=np.int64)
        if pinned.max() >= n_vertices:
            raise SceneConfigError(
                f"pinned vertex {int(pinned.max())} out of range for {n_vertices} vertices", field_path=f"meshes.{index}.pinned"
            )
        mask[pinned] = True
    return mask


def build_mesh(spec: MeshSpec, base_dir: Optional[str] = None, index: int = 0) -> TriangleMesh:
    """
    Build the mesh of one scene entry with its masses and pins.

    Pinned vertices get infinite mass.

    Raises:
        SceneConfigError: If the entry cannot be turned into a valid mesh
    """
    field = f"meshes.{index}"
    try:
        if spec.path is not None:
            path = Path(spec.path)
            if not path.is_absolute() and base_dir:
                path = Path(base_dir) / path
            mesh = load_obj(path, oriented=spec.oriented, name=spec.name)
        else:
            mesh = PRIMITIVES[spec.primitive.kind](oriented=spec.oriented, name=spec.name, **spec.primitive.params)
    except TypeError as e:
        raise SceneConfigError(str(e), field_path=f"{field}.primitive.params")
    except (MeshError, OSError) as e:
        raise SceneConfigError(str(e), field_path=f"{field}.path")

    if any(spec.translate):
        mesh = translated(mesh, spec.translate)

    if spec.vertex_mass is not None:
        masses = np.full(mesh.n_vertices, spec.vertex_mass)
    elif spec.density is not None:
        masses = lumped_masses(mesh, spec.density)
    else:
        masses = np.ones(mesh.n_vertices)
    masses[_pinned_mask(spec, mesh.n_vertices, index)] = np.inf
    mesh = mesh.with_masses(masses)

    if spec.pressure > 0 and not (mesh.oriented and mesh.edges.is_closed):
        raise SceneConfigError("pressure needs a closed oriented mesh", field_path=f"{field}.pressure")
    logger.debug(f"Built {mesh} ({int(mesh.pinned.sum())} pinned)")
    return mesh


def build_meshes(scene: SceneConfig) -> List[TriangleMesh]:
    """Build every mesh of a scene, in scene order."""
    return [build_mesh(spec, scene.base_dir, index) for index, spec in enumerate(scene.meshes)]
