"""Two-stage fusion of position and normal images into a garment mesh."""

from .losses import (
    loss_collision,
    loss_edge,
    loss_normal_consistency,
    loss_normal_render,
    loss_position_render,
    loss_reg_visible,
    penetrating_count,
    vertex_normals_torch,
)
from .optimizer import (
    FusionConfig,
    FusionResult,
    FusionState,
    fuse,
    init_positions,
    stage1_optimize,
    stage2_optimize,
    write_trace,
)

__all__ = [
    'loss_collision',
    'loss_edge',
    'loss_normal_consistency',
    'loss_normal_render',
    'loss_position_render',
    'loss_reg_visible',
    'penetrating_count',
    'vertex_normals_torch',
    'FusionConfig',
    'FusionResult',
    'FusionState',
    'fuse',
    'init_positions',
    'stage1_optimize',
    'stage2_optimize',
    'write_trace',
]
