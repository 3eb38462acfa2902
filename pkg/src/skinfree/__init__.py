"""
skinfree: skinning-free garment deformation.

This package provides tools for:
- Rendering garment and body attributes into fixed-template position/normal images
- Transferring template images to posed garment images with a transformer network
- Fusing predicted front/back images back into a collision-free garment mesh
- Generating synthetic articulated body/garment datasets and evaluating results
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataError,
    FusionDivergenceError,
    GeometryError,
    MeshFormatError,
    SkinfreeError,
)
from .mesh import TriMesh, load_obj, save_obj
from .raster import CameraRig, PositionBounds, build_camera_rig
from .fusion import FusionConfig, fuse
from .models import TransferModel, TransferNet, TransferNetConfig
from .metrics import evaluate_clip
from .utils import Config

__all__ = [
    'ConfigError',
    'DataError',
    'FusionDivergenceError',
    'GeometryError',
    'MeshFormatError',
    'SkinfreeError',
    'TriMesh',
    'load_obj',
    'save_obj',
    'CameraRig',
    'PositionBounds',
    'build_camera_rig',
    'FusionConfig',
    'fuse',
    'TransferModel',
    'TransferNet',
    'TransferNetConfig',
    'evaluate_clip',
    'Config',
]
