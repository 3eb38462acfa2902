"""
Triangle mesh data model for skinfree.

Garment templates, posed bodies and deformed garments all share the TriMesh
type. Coordinates are millimetres throughout.
"""

import dataclasses
from typing import Optional

import numpy as np

from ..errors import GeometryError

# Faces smaller than this do not contribute to vertex normals.
NORMAL_AREA_EPS = 1e-9
# Minimum face area a garment template must satisfy.
TEMPLATE_AREA_EPS = 1e-6


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclasses.dataclass(frozen=True)
class TriMesh:
    """
    Indexed triangle mesh.

    Attributes:
        vertices: (N, 3) float64 positions in millimetres
        faces: (F, 3) int64 vertex indices, counter-clockwise seen from outside
        name: Free-form label
    """
    vertices: np.ndarray
    faces: np.ndarray
    name: str = "mesh"

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.array(self.faces, dtype=np.int64).reshape(-1, 3)

        if not np.all(np.isfinite(vertices)):
            bad = int(np.argwhere(~np.isfinite(vertices))[0, 0])
            raise GeometryError(f"{self.name}: vertex {bad} is not finite")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise GeometryError(
                f"{self.name}: face index out of range for {len(vertices)} vertices"
            )

        object.__setattr__(self, "vertices", _freeze(vertices))
        object.__setattr__(self, "faces", _freeze(faces))

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def with_vertices(self, vertices: np.ndarray, name: Optional[str] = None) -> "TriMesh":
        """Return a mesh sharing this topology with new vertex positions."""
        return TriMesh(vertices, self.faces, name or self.name)

    def bounding_box(self) -> tuple:
        """Axis-aligned (min corner, max corner)."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bbox_diagonal(self) -> float:
        low, high = self.bounding_box()
        return float(np.linalg.norm(high - low))

    def face_cross(self) -> np.ndarray:
        """Unnormalized face normals; their norm is twice the face area."""
        v = self.vertices
        f = self.faces
        return np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_cross(), axis=1)

    def validate_template(self) -> "TriMesh":
        """
        Check the extra invariant required of garment templates.

        Raises:
            GeometryError: If any face area is below TEMPLATE_AREA_EPS
        """
        areas = self.face_areas()
        small = np.flatnonzero(areas <= TEMPLATE_AREA_EPS)
        if small.size:
            raise GeometryError(
                f"{self.name}: {small.size} faces below template area threshold "
                f"(first: face {int(small[0])})"
            )
        return self


@dataclasses.dataclass(frozen=True)
class EdgeSet:
    """
    Undirected mesh edges with their template rest lengths.

    Attributes:
        edges: (E, 2) int64 pairs with edges[:, 0] < edges[:, 1], sorted
        rest_lengths: (E,) float64 lengths measured on the template (mm)
    """
    edges: np.ndarray
    rest_lengths: np.ndarray

    def __post_init__(self):
        edges = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        rest = np.array(self.rest_lengths, dtype=np.float64).reshape(-1)
        if len(edges) != len(rest):
            raise GeometryError("edge and rest-length counts differ")
        if rest.size and rest.min() <= 0:
            raise GeometryError(f"edge {int(np.argmin(rest))} has zero rest length")
        object.__setattr__(self, "edges", _freeze(edges))
        object.__setattr__(self, "rest_lengths", _freeze(rest))

    def __len__(self) -> int:
        return len(self.edges)


@dataclasses.dataclass(frozen=True)
class RootTransform:
    """
    Global rigid pose of a sample: world = rotation @ canonical + translation.

    Attributes:
        rotation: (3, 3) proper rotation matrix
        translation: (3,) translation in millimetres
    """
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        if abs(np.linalg.det(rotation) - 1.0) > 1e-6:
            raise GeometryError("root rotation must have determinant +1")
        if not np.allclose(rotation.T @ rotation, np.eye(3), atol=1e-6):
            raise GeometryError("root rotation is not orthonormal")
        object.__setattr__(self, "rotation", _freeze(rotation))
        object.__setattr__(self, "translation", _freeze(translation))

    @classmethod
    def identity(cls) -> "RootTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_yaw(cls, yaw: float, translation) -> "RootTransform":
        """Rotation by `yaw` radians about +y followed by a translation."""
        c, s = np.cos(yaw), np.sin(yaw)
        rotation = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        return cls(rotation, translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map canonical points to world space."""
        return points @ self.rotation.T + self.translation

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RootTransform":
        return cls(np.array(data["rotation"]), np.array(data["translation"]))


def vertex_normals(mesh: TriMesh) -> np.ndarray:
    """
    Area-weighted vertex normals.

    Faces with area below NORMAL_AREA_EPS are skipped; a vertex whose
    accumulated normal vanishes gets (0, 0, 1).

    Args:
        mesh: Input mesh

    Returns:
        (N, 3) array of unit vectors
    """
    cross = mesh.face_cross()
    keep = 0.5 * np.linalg.norm(cross, axis=1) >= NORMAL_AREA_EPS
    cross = cross[keep]
    faces = mesh.faces[keep]

    accumulated = np.zeros_like(mesh.vertices)
    for corner in range(3):
        np.add.at(accumulated, faces[:, corner], cross)

    norms = np.linalg.norm(accumulated, axis=1)
    normals = np.tile(np.array([0.0, 0.0, 1.0]), (mesh.num_vertices, 1))
    nonzero = norms > 0
    normals[nonzero] = accumulated[nonzero] / norms[nonzero, None]
    return normals


def edge_set(mesh: TriMesh) -> EdgeSet:
    """
    Collect the unique undirected edges of all faces.

    Args:
        mesh: Input mesh; rest lengths are measured on its vertices

    Returns:
        EdgeSet with (min, max) ordered, lexicographically sorted pairs
    """
    f = mesh.faces
    sides = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
    sides = np.sort(sides, axis=1)
    edges = np.unique(sides, axis=0) if len(sides) else np.zeros((0, 2), dtype=np.int64)
    lengths = np.linalg.norm(
        mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1
    )
    return EdgeSet(edges, lengths)


def apply_root_normalization(mesh: TriMesh, root: RootTransform) -> TriMesh:
    """
    Undo the global pose: v -> rotation^T (v - translation).

    Args:
        mesh: World-space mesh
        root: Global pose of the sample

    Returns:
        Mesh in the canonical root frame, faces unchanged
    """
    return mesh.with_vertices((mesh.vertices - root.translation) @ root.rotation)
