"""Mesh data model and OBJ I/O."""

from .trimesh import (
    TriMesh,
    EdgeSet,
    RootTransform,
    vertex_normals,
    edge_set,
    apply_root_normalization,
)
from .obj_io import load_obj, save_obj

__all__ = [
    'TriMesh',
    'EdgeSet',
    'RootTransform',
    'vertex_normals',
    'edge_set',
    'apply_root_normalization',
    'load_obj',
    'save_obj',
]
