"""
Exception hierarchy for skinfree.

Every error raised by the package derives from SkinfreeError and from the
closest builtin, so callers catching ValueError or RuntimeError keep working.
"""

from typing import Dict, List, Optional


class SkinfreeError(Exception):
    """Base class for all skinfree errors."""


class ConfigError(SkinfreeError, ValueError):
    """Invalid or incomplete configuration."""


class MeshFormatError(SkinfreeError, ValueError):
    """Malformed OBJ input, reported with its location."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class DataError(SkinfreeError, ValueError):
    """Dataset or image content that cannot be used."""


class BoundsError(DataError):
    """A position lies outside the RGB encoding bounds."""

    def __init__(self, vertex: int, axis: int, value: float, low: float, high: float):
        self.vertex = vertex
        self.axis = axis
        axis_name = "xyz"[axis]
        super().__init__(
            f"vertex {vertex} has {axis_name}={value:.6g} outside bounds "
            f"[{low:.6g}, {high:.6g}]"
        )


class GeometryError(SkinfreeError, ValueError):
    """Degenerate or inconsistent geometry."""


class FusionDivergenceError(SkinfreeError, RuntimeError):
    """Fusion loss blew up; carries the trace recorded before the abort."""

    def __init__(self, message: str, stage: str, step: int,
                 trace: Optional[List[Dict[str, float]]] = None):
        self.stage = stage
        self.step = step
        self.trace = trace or []
        super().__init__(f"{stage} diverged at step {step}: {message}")
