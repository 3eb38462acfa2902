"""
Axis-aligned bounding-volume hierarchy over mesh triangles.

Queries run breadth-first over all points at once: every (point, node) pair
whose box lies closer than the point's best distance so far is expanded.
A k-d tree over the mesh vertices seeds the best distance, since the nearest
vertex bounds the distance to the surface from above.
"""

import dataclasses
from typing import Tuple

import numpy as np
from scipy.spatial import cKDTree

from ..errors import GeometryError
from ..mesh.trimesh import TriMesh
from .closest_point import closest_point_on_triangles

LEAF_SIZE = 8


@dataclasses.dataclass(frozen=True)
class TriBVH:
    """
    Flattened BVH.

    Attributes:
        box_min, box_max: (K, 3) node bounds
        left, right: (K,) child node ids, -1 for leaves
        start, count: (K,) leaf ranges into `order`
        order: (F,) triangle ids grouped by leaf
        triangles: (F, 3, 3) triangle corner positions
        vertex_tree: k-d tree over the mesh vertices
    """
    box_min: np.ndarray
    box_max: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray
    triangles: np.ndarray
    vertex_tree: cKDTree

    @property
    def num_nodes(self) -> int:
        return len(self.left)

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.left < 0)


def build_bvh(mesh: TriMesh, leaf_size: int = LEAF_SIZE) -> TriBVH:
    """
    Build a median-split BVH over the mesh triangles.

    Nodes split at the median centroid along their widest centroid axis
    (stable sort, so the build is deterministic).

    Args:
        mesh: Triangle mesh
        leaf_size: Maximum triangles per leaf

    Returns:
        TriBVH

    Raises:
        GeometryError: If the mesh has no faces
    """
    if mesh.num_faces == 0:
        raise GeometryError(f"{mesh.name}: cannot build a BVH over an empty mesh")

    triangles = mesh.vertices[mesh.faces]
    tri_min = triangles.min(axis=1)
    tri_max = triangles.max(axis=1)
    centroids = triangles.mean(axis=1)

    order = np.arange(mesh.num_faces)
    box_min, box_max, left, right, start, count = [], [], [], [], [], []

    def new_node(lo: int, hi: int) -> int:
        ids = order[lo:hi]
        box_min.append(tri_min[ids].min(axis=0))
        box_max.append(tri_max[ids].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(lo)
        count.append(hi - lo)
        return len(left) - 1

    root = new_node(0, mesh.num_faces)
    stack = [(root, 0, mesh.num_faces)]
    while stack:
        node, lo, hi = stack.pop()
        if hi - lo <= leaf_size:
            continue
        ids = order[lo:hi]
        spread = centroids[ids].max(axis=0) - centroids[ids].min(axis=0)
        axis = int(np.argmax(spread))
        order[lo:hi] = ids[np.argsort(centroids[ids, axis], kind="stable")]
        mid = lo + (hi - lo) // 2
        left[node] = new_node(lo, mid)
        right[node] = new_node(mid, hi)
        count[node] = 0
        stack.append((right[node], mid, hi))
        stack.append((left[node], lo, mid))

    return TriBVH(
        np.array(box_min), np.array(box_max),
        np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
        np.array(start, dtype=np.int64), np.array(count, dtype=np.int64),
        order, triangles, cKDTree(mesh.vertices),
    )


def _box_distance2(points: np.ndarray, low: np.ndarray, high: np.ndarray) -> np.ndarray:
    gap = np.maximum(np.maximum(low - points, points - high), 0.0)
    return np.einsum("ij,ij->i", gap, gap)


def closest_triangles(bvh: TriBVH, points: np.ndarray) -> Tuple[np.ndarray, ...]:
    """
    Closest surface point for each query point.

    Ties in distance go to the smaller triangle index, so answers do not
    depend on how the hierarchy was built.

    Args:
        bvh: Hierarchy over the mesh
        points: (M, 3) query points

    Returns:
        (squared distances (M,), closest points (M, 3),
         triangle ids (M,), feature codes (M,))
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    m = len(points)
    seed, _ = bvh.vertex_tree.query(points)
    best_d2 = seed ** 2 * (1.0 + 1e-9) + 1e-12
    best_tri = np.full(m, -1, dtype=np.int64)
    best_point = np.zeros((m, 3))
    best_feature = np.zeros(m, dtype=np.int64)

    q = np.arange(m)
    nodes = np.zeros(m, dtype=np.int64)
    while q.size:
        lb = _box_distance2(points[q], bvh.box_min[nodes], bvh.box_max[nodes])
        keep = lb <= best_d2[q]
        q, nodes = q[keep], nodes[keep]

        is_leaf = bvh.left[nodes] < 0
        lq, ln = q[is_leaf], nodes[is_leaf]
        if lq.size:
            counts = bvh.count[ln]
            pair_q = np.repeat(lq, counts)
            offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
            tri = bvh.order[np.repeat(bvh.start[ln], counts) + offsets]
            corners = bvh.triangles[tri]
            cp, feature = closest_point_on_triangles(
                points[pair_q], corners[:, 0], corners[:, 1], corners[:, 2]
            )
            diff = points[pair_q] - cp
            d2 = np.einsum("ij,ij->i", diff, diff)

            ranked = np.lexsort((tri, d2, pair_q))
            pair_q, tri, d2, cp, feature = (
                pair_q[ranked], tri[ranked], d2[ranked], cp[ranked], feature[ranked]
            )
            first = np.r_[True, pair_q[1:] != pair_q[:-1]]
            pq, pt, pd = pair_q[first], tri[first], d2[first]
            better = (
                (best_tri[pq] < 0) | (pd < best_d2[pq])
                | ((pd == best_d2[pq]) & (pt < best_tri[pq]))
            )
            pq = pq[better]
            sel = np.flatnonzero(first)[better]
            best_d2[pq] = d2[sel]
            best_tri[pq] = tri[sel]
            best_point[pq] = cp[sel]
            best_feature[pq] = feature[sel]

        iq, inode = q[~is_leaf], nodes[~is_leaf]
        q = np.concatenate([iq, iq])
        nodes = np.concatenate([bvh.left[inode], bvh.right[inode]])

    return best_d2, best_point, best_tri, best_feature


def brute_force_closest(mesh: TriMesh, points: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Reference closest-point scan over every triangle (for checks and tiny meshes)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    triangles = mesh.vertices[mesh.faces]
    f = len(triangles)
    best_d2 = np.full(len(points), np.inf)
    best_point = np.zeros((len(points), 3))
    best_tri = np.full(len(points), -1, dtype=np.int64)
    best_feature = np.zeros(len(points), dtype=np.int64)
    for i, p in enumerate(points):
        cp, feature = closest_point_on_triangles(
            np.repeat(p[None], f, axis=0), triangles[:, 0], triangles[:, 1], triangles[:, 2]
        )
        d2 = np.einsum("ij,ij->i", p - cp, p - cp)
        j = int(np.argmin(d2))
        best_d2[i], best_point[i], best_tri[i], best_feature[i] = d2[j], cp[j], j, feature[j]
    return best_d2, best_point, best_tri, best_feature
