"""Spatial queries against body and garment meshes."""

from .closest_point import closest_point_on_triangles
from .bvh import TriBVH, brute_force_closest, build_bvh, closest_triangles
from .sdf import BodyCollider, SignedDistanceResult, nearest_in_set, signed_distance

__all__ = [
    'closest_point_on_triangles',
    'TriBVH',
    'brute_force_closest',
    'build_bvh',
    'closest_triangles',
    'BodyCollider',
    'SignedDistanceResult',
    'nearest_in_set',
    'signed_distance',
]
