"""
Signed distance to a closed body mesh and nearest-vertex queries.

The sign comes from the angle-weighted pseudo-normal of the closest feature
(face, edge or vertex), negative inside.
"""

import dataclasses
from typing import Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from ..errors import GeometryError
from ..mesh.trimesh import TriMesh
from .bvh import TriBVH, build_bvh, closest_triangles
from .closest_point import EDGE_AB, EDGE_BC, EDGE_CA

_EDGE_SLOT = {EDGE_AB: 0, EDGE_BC: 1, EDGE_CA: 2}


@dataclasses.dataclass(frozen=True)
class SignedDistanceResult:
    """
    Signed distances of a batch of points.

    Attributes:
        distance: (M,) signed distance in mm, negative inside
        closest_point: (M, 3) closest surface points
        triangle: (M,) closest triangle ids
        pseudo_normal: (M, 3) unit outward pseudo-normals at the closest features
    """
    distance: np.ndarray
    closest_point: np.ndarray
    triangle: np.ndarray
    pseudo_normal: np.ndarray


class BodyCollider:
    """
    A closed, consistently wound body mesh prepared for signed-distance queries.
    """

    def __init__(self, mesh: TriMesh, bvh: TriBVH = None):
        """
        Args:
            mesh: Closed body mesh with outward winding
            bvh: Prebuilt hierarchy (built here when omitted)
        """
        self.mesh = mesh
        self.bvh = bvh if bvh is not None else build_bvh(mesh)
        self._build_pseudo_normals()

    def _build_pseudo_normals(self):
        v = self.mesh.vertices
        f = self.mesh.faces
        cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        lengths = np.linalg.norm(cross, axis=1, keepdims=True)
        self.face_normals = cross / np.where(lengths > 0, lengths, 1.0)

        # Interior angle at each corner weights the vertex pseudo-normal.
        vertex_normals = np.zeros_like(v)
        for k in range(3):
            e1 = v[f[:, (k + 1) % 3]] - v[f[:, k]]
            e2 = v[f[:, (k + 2) % 3]] - v[f[:, k]]
            cos = np.einsum("ij,ij->i", e1, e2) / np.maximum(
                np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1), 1e-300
            )
            angle = np.arccos(np.clip(cos, -1.0, 1.0))
            np.add.at(vertex_normals, f[:, k], angle[:, None] * self.face_normals)
        self.vertex_normals = _normalize(vertex_normals)

        sides = np.stack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=1)
        keys = np.sort(sides, axis=2).reshape(-1, 2)
        unique, inverse = np.unique(keys, axis=0, return_inverse=True)
        edge_normals = np.zeros((len(unique), 3))
        np.add.at(edge_normals, inverse.reshape(-1), np.repeat(self.face_normals, 3, axis=0))
        self.edge_normals = _normalize(edge_normals)
        self.face_edges = inverse.reshape(-1, 3)

    def pseudo_normals(self, triangle: np.ndarray, feature: np.ndarray) -> np.ndarray:
        """Outward pseudo-normal of the closest feature of each query."""
        normals = self.face_normals[triangle].copy()
        for code, slot in _EDGE_SLOT.items():
            hit = feature == code
            normals[hit] = self.edge_normals[self.face_edges[triangle[hit], slot]]
        for corner in range(3):
            hit = feature == corner + 1
            normals[hit] = self.vertex_normals[self.mesh.faces[triangle[hit], corner]]
        return normals

    def query(self, points: np.ndarray) -> SignedDistanceResult:
        """
        Signed distance of every point.

        Args:
            points: (M, 3) positions in the body's frame and units

        Returns:
            SignedDistanceResult
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        d2, closest, triangle, feature = closest_triangles(self.bvh, points)
        normals = self.pseudo_normals(triangle, feature)
        side = np.einsum("ij,ij->i", points - closest, normals)
        distance = np.sqrt(d2)
        distance = np.where(side < 0, -distance, distance)
        return SignedDistanceResult(distance, closest, triangle, normals)

    def scaled(self, factor: float) -> "BodyCollider":
        """Collider over the same body with coordinates multiplied by `factor`."""
        return BodyCollider(self.mesh.with_vertices(self.mesh.vertices * factor))


def _normalize(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return vectors / np.where(norms > 0, norms, 1.0)


def signed_distance(point: np.ndarray, body: BodyCollider) -> SignedDistanceResult:
    """
    Signed vertex-to-mesh distance.

    Args:
        point: (3,) or (M, 3) query positions
        body: Prepared body

    Returns:
        SignedDistanceResult (batched even for a single point)
    """
    return body.query(point)


def nearest_in_set(query: Union[int, np.ndarray],
                   candidates: np.ndarray,
                   template: TriMesh) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nearest candidate vertex in template space, ties to the smaller index.

    Args:
        query: Vertex index or array of indices
        candidates: Candidate vertex indices
        template: Template mesh whose positions define distances

    Returns:
        (nearest candidate index, Euclidean distance), scalars for a scalar query

    Raises:
        GeometryError: If there are no candidates
    """
    candidates = np.unique(np.asarray(candidates, dtype=np.int64))
    if candidates.size == 0:
        raise GeometryError("nearest_in_set needs at least one candidate")
    scalar = np.ndim(query) == 0
    queries = np.atleast_1d(np.asarray(query, dtype=np.int64))

    positions = template.vertices
    points = positions[queries]
    tree = cKDTree(positions[candidates])
    nearest, _ = tree.query(points, k=1)
    # Every candidate within the nearest distance, then exact ties to the smallest index.
    within = tree.query_ball_point(points, np.asarray(nearest) * (1.0 + 1e-9) + 1e-12)
    choice = np.empty(len(queries), dtype=np.int64)
    best = np.empty(len(queries))
    for i, found in enumerate(within):
        found = candidates[np.asarray(found, dtype=np.int64)]
        dist = np.linalg.norm(positions[found] - points[i], axis=1)
        best[i] = dist.min()
        choice[i] = found[dist <= best[i]].min()
    if scalar:
        return int(choice[0]), float(best[0])
    return choice, best
