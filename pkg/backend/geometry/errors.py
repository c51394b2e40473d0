"""
Error types for the untangle geometry pipeline.

Every failure the library reports on purpose derives from UntangleError, so
callers (the CLI in particular) can map them onto exit codes without catching
unrelated exceptions.
"""

from typing import Any, Dict, Optional


class UntangleError(Exception):
    """Base class for all expected untangle failures."""


class MeshError(UntangleError):
    """
    Invalid mesh data or an OBJ file that could not be parsed.

    Args:
        message: Human-readable description
        line: 1-based line number in the source file, if the error came from a parser
    """

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateFaceError(MeshError):
    """A face whose area is below the degenerate-area tolerance."""

    def __init__(self, face: int, area: float):
        self.face = face
        self.area = area
        super().__init__(f"degenerate face {face} (area {area:.3e} m^2)")


class OpenMeshError(MeshError):
    """An operation that needs a closed surface was given an open one."""


class OrientationError(MeshError):
    """A face mesh, or both meshes of a pair, lack the orientation an operation needs."""


class BvhError(UntangleError):
    """A bounding volume hierarchy could not be built."""


class StencilError(UntangleError):
    """A penetration stencil was requested against an un-oriented face."""


class ZoneConvergenceError(UntangleError):
    """
    The multiplier system of an impact zone missed its residual target.

    Args:
        message: Human-readable description
        diagnostics: Solve diagnostics of the failed zone
    """

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class SimulationError(UntangleError):
    """A simulation step produced a non-finite force or position."""

    def __init__(self, message: str, step: Optional[int] = None, mesh: Optional[str] = None, vertex: Optional[int] = None):
        self.step = step
        self.mesh = mesh
        self.vertex = vertex
        super().__init__(message)


class SceneConfigError(UntangleError):
    """
    A scene document failed validation.

    Args:
        message: Human-readable description
        field_path: Dotted path of the offending field ("meshes.0.oriented")
    """

    def __init__(self, message: str, field_path: str = ""):
        self.field_path = field_path
        if field_path:
            message = f"{field_path}: {message}"
        super().__init__(message)
