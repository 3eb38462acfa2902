"""
Vectorized closest point on triangles.

Region tests walk the Voronoi regions of the vertices, edges and face;
every query is paired with one triangle.
"""

from typing import Tuple

import numpy as np

# Closest-feature codes.
FACE = 0
VERTEX_A, VERTEX_B, VERTEX_C = 1, 2, 3
EDGE_AB, EDGE_BC, EDGE_CA = 4, 5, 6


def _dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", u, v)


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return num / np.where(den == 0, 1.0, den)


def closest_point_on_triangles(p: np.ndarray,
                               a: np.ndarray,
                               b: np.ndarray,
                               c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Closest point of each triangle (a, b, c) to the paired query p.

    Args:
        p, a, b, c: (M, 3) arrays

    Returns:
        (M, 3) closest points and (M,) feature codes (FACE, VERTEX_*, EDGE_*)
    """
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    bp = p - b
    d3 = _dot(ab, bp)
    d4 = _dot(ac, bp)
    cp = p - c
    d5 = _dot(ab, cp)
    d6 = _dot(ac, cp)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    # Interior by default, then overwrite in reverse priority order.
    denom = _safe_div(np.ones_like(va), va + vb + vc)
    v = vb * denom
    w = vc * denom
    point = a + ab * v[:, None] + ac * w[:, None]
    feature = np.full(len(p), FACE, dtype=np.int64)

    in_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    t_bc = _safe_div(d4 - d3, (d4 - d3) + (d5 - d6))
    point = np.where(in_bc[:, None], b + (c - b) * t_bc[:, None], point)
    feature = np.where(in_bc, EDGE_BC, feature)

    in_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    t_ac = _safe_div(d2, d2 - d6)
    point = np.where(in_ac[:, None], a + ac * t_ac[:, None], point)
    feature = np.where(in_ac, EDGE_CA, feature)

    in_c = (d6 >= 0) & (d5 <= d6)
    point = np.where(in_c[:, None], c, point)
    feature = np.where(in_c, VERTEX_C, feature)

    in_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    t_ab = _safe_div(d1, d1 - d3)
    point = np.where(in_ab[:, None], a + ab * t_ab[:, None], point)
    feature = np.where(in_ab, EDGE_AB, feature)

    in_b = (d3 >= 0) & (d4 <= d3)
    point = np.where(in_b[:, None], b, point)
    feature = np.where(in_b, VERTEX_B, feature)

    in_a = (d1 <= 0) & (d2 <= 0)
    point = np.where(in_a[:, None], a, point)
    feature = np.where(in_a, VERTEX_A, feature)

    return point, feature
