"""Fixed-template rasterization, RGB attribute encoding and visibility."""

from .camera import VIEWS, Camera, CameraConfig, CameraRig, build_camera_rig, check_view
from .rasterizer import (
    RasterMap,
    Silhouette,
    TorchRenderer,
    rasterize_mesh,
    rasterize_template,
    render_adjoint,
    render_pixels,
)
from .encoding import (
    AttributeImage,
    PositionBounds,
    encode_mesh_images,
    render_attribute,
    rgb_decode_normals,
    rgb_decode_positions,
    rgb_encode_normals,
    rgb_encode_positions,
)
from .visibility import VisibilityTable, sample_image_bilinear, vertex_visibility

__all__ = [
    'VIEWS',
    'Camera',
    'CameraConfig',
    'CameraRig',
    'build_camera_rig',
    'check_view',
    'RasterMap',
    'Silhouette',
    'TorchRenderer',
    'rasterize_mesh',
    'rasterize_template',
    'render_adjoint',
    'render_pixels',
    'AttributeImage',
    'PositionBounds',
    'encode_mesh_images',
    'render_attribute',
    'rgb_decode_normals',
    'rgb_decode_positions',
    'rgb_encode_normals',
    'rgb_encode_positions',
    'VisibilityTable',
    'sample_image_bilinear',
    'vertex_visibility',
]
