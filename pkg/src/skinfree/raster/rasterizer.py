"""
Fixed-template rasterization.

Coverage is computed once from the template; afterwards rendering any
per-vertex attribute is a sparse linear map from vertices to pixels.
"""

import dataclasses
import logging
from typing import Tuple

import numpy as np
import torch

from ..mesh.trimesh import TriMesh
from .camera import CameraRig, check_view

logger = logging.getLogger(__name__)

# Pixels claimed by two faces within this depth keep the smaller face index.
DEPTH_TIE_EPS = 1e-9
# Edge-function slack so pixel centres on shared edges are not dropped.
EDGE_EPS = 1e-9


@dataclasses.dataclass(frozen=True)
class Silhouette:
    """Boolean H x W coverage mask of a view."""
    mask: np.ndarray
    view: str

    @property
    def resolution(self) -> int:
        return self.mask.shape[0]


@dataclasses.dataclass(frozen=True)
class RasterMap:
    """
    Per-pixel face, perspective-correct barycentrics and depth of one view.

    Attributes:
        view: View label
        face_index: (H, W) covering face, -1 where empty
        barycentric: (H, W, 3) weights over the covering face's corners
        depth: (H, W) view depth in mm, +inf where empty
        faces: (F, 3) template faces the indices refer to
        num_vertices: Template vertex count (length of attribute arrays)
    """
    view: str
    face_index: np.ndarray
    barycentric: np.ndarray
    depth: np.ndarray
    faces: np.ndarray
    num_vertices: int

    def __post_init__(self):
        covered = np.flatnonzero(self.face_index.reshape(-1) >= 0)
        object.__setattr__(self, "pixels", covered)
        object.__setattr__(
            self, "pixel_vertices", self.faces[self.face_index.reshape(-1)[covered]]
        )
        object.__setattr__(
            self, "pixel_weights", self.barycentric.reshape(-1, 3)[covered]
        )
        for array in (self.face_index, self.barycentric, self.depth):
            array.setflags(write=False)

    @property
    def resolution(self) -> int:
        return self.face_index.shape[0]

    @property
    def silhouette(self) -> Silhouette:
        return Silhouette(self.face_index >= 0, self.view)


def rasterize_mesh(mesh: TriMesh, rig: CameraRig, view: str) -> Tuple[RasterMap, Silhouette]:
    """
    Rasterize a mesh at pixel centres with a nearest-depth test.

    Faces are visited in index order and a later face only replaces a pixel
    when it is nearer by more than DEPTH_TIE_EPS, so ties go to the smaller
    face index. No face culling is applied.

    Args:
        mesh: Mesh to rasterize (the garment template, or a posed body)
        rig: Camera rig
        view: "front" or "back"

    Returns:
        (RasterMap, Silhouette) for the view
    """
    camera = rig[check_view(view)]
    res = camera.resolution
    coords, depth = camera.project(mesh.vertices)

    face_index = np.full((res, res), -1, dtype=np.int64)
    zbuffer = np.full((res, res), np.inf)
    bary = np.zeros((res, res, 3))

    for f, corners in enumerate(mesh.faces):
        z = depth[corners]
        if np.any(z <= 0):
            continue
        xs = coords[corners, 0]
        ys = coords[corners, 1]
        area = (xs[1] - xs[0]) * (ys[2] - ys[0]) - (xs[2] - xs[0]) * (ys[1] - ys[0])
        if abs(area) < 1e-12:
            continue

        c0 = max(0, int(np.floor(xs.min() - 0.5)))
        c1 = min(res - 1, int(np.ceil(xs.max() - 0.5)))
        r0 = max(0, int(np.floor(ys.min() - 0.5)))
        r1 = min(res - 1, int(np.ceil(ys.max() - 0.5)))
        if c0 > c1 or r0 > r1:
            continue

        px, py = np.meshgrid(np.arange(c0, c1 + 1) + 0.5, np.arange(r0, r1 + 1) + 0.5)
        l0 = ((xs[1] - px) * (ys[2] - py) - (xs[2] - px) * (ys[1] - py)) / area
        l1 = ((xs[2] - px) * (ys[0] - py) - (xs[0] - px) * (ys[2] - py)) / area
        l2 = 1.0 - l0 - l1
        inside = (l0 >= -EDGE_EPS) & (l1 >= -EDGE_EPS) & (l2 >= -EDGE_EPS)
        if not inside.any():
            continue

        # Screen-space weights become perspective-correct by dividing by depth.
        q = np.stack([l0[inside] / z[0], l1[inside] / z[1], l2[inside] / z[2]], axis=1)
        inv_depth = q.sum(axis=1)
        pixel_depth = 1.0 / inv_depth
        weights = q / inv_depth[:, None]

        rows = np.nonzero(inside)[0] + r0
        cols = np.nonzero(inside)[1] + c0
        nearer = pixel_depth < zbuffer[rows, cols] - DEPTH_TIE_EPS
        rows, cols = rows[nearer], cols[nearer]
        zbuffer[rows, cols] = pixel_depth[nearer]
        face_index[rows, cols] = f
        bary[rows, cols] = weights[nearer]

    raster = RasterMap(view, face_index, bary, zbuffer, mesh.faces, mesh.num_vertices)
    logger.debug("rasterized %s/%s: %d covered pixels", mesh.name, view, raster.pixels.size)
    return raster, raster.silhouette


def rasterize_template(template: TriMesh, rig: CameraRig, view: str) -> Tuple[RasterMap, Silhouette]:
    """Rasterize the garment template; its coverage is reused for every deformation."""
    return rasterize_mesh(template, rig, view)


def render_pixels(raster: RasterMap, attrs: np.ndarray) -> np.ndarray:
    """
    Apply the linear vertex-to-pixel map.

    Args:
        raster: Template raster
        attrs: (N, C) per-vertex values

    Returns:
        (H, W, C) image; uncovered pixels are 0
    """
    attrs = np.asarray(attrs, dtype=np.float64)
    res = raster.resolution
    flat = np.zeros((res * res, attrs.shape[1]))
    flat[raster.pixels] = np.einsum(
        "pk,pkc->pc", raster.pixel_weights, attrs[raster.pixel_vertices]
    )
    return flat.reshape(res, res, attrs.shape[1])


def render_adjoint(raster: RasterMap, pixel_grad: np.ndarray) -> np.ndarray:
    """
    Transpose of render_pixels: scatter pixel gradients back to vertices.

    Args:
        raster: Template raster
        pixel_grad: (H, W, C) gradient with respect to the rendered image

    Returns:
        (N, C) gradient with respect to the vertex attributes
    """
    pixel_grad = np.asarray(pixel_grad, dtype=np.float64)
    channels = pixel_grad.shape[-1]
    g = pixel_grad.reshape(-1, channels)[raster.pixels]
    out = np.zeros((raster.num_vertices, channels))
    for k in range(3):
        np.add.at(out, raster.pixel_vertices[:, k], raster.pixel_weights[:, k, None] * g)
    return out


class TorchRenderer:
    """
    Differentiable renderer over a fixed raster.

    Gathering vertex values by index makes autograd's backward pass exactly
    render_adjoint.
    """

    def __init__(self, raster: RasterMap, dtype: torch.dtype = torch.float64):
        self.raster = raster
        self.pixels = torch.as_tensor(raster.pixels, dtype=torch.long)
        self.pixel_vertices = torch.as_tensor(raster.pixel_vertices, dtype=torch.long)
        self.pixel_weights = torch.as_tensor(raster.pixel_weights, dtype=dtype)
        self.mask = torch.as_tensor(raster.silhouette.mask)

    def covered(self, attrs: torch.Tensor) -> torch.Tensor:
        """(P, C) values at covered pixels only, in raster.pixels order."""
        return torch.einsum("pk,pkc->pc", self.pixel_weights, attrs[self.pixel_vertices])

    def __call__(self, attrs: torch.Tensor) -> torch.Tensor:
        res = self.raster.resolution
        flat = attrs.new_zeros((res * res, attrs.shape[1]))
        flat = flat.index_copy(0, self.pixels, self.covered(attrs))
        return flat.reshape(res, res, attrs.shape[1])
