"""
Loss terms of the two-stage fusion, as float64 torch functions of the
vertex positions.

All positions are in the optimization length unit; rest lengths, anchors,
bounds and the collider must be expressed in the same unit.
"""

from typing import Dict, Optional, Union

import numpy as np
import torch

from ..geometry.sdf import BodyCollider
from ..mesh.trimesh import NORMAL_AREA_EPS, EdgeSet
from ..raster.encoding import AttributeImage, PositionBounds
from ..raster.rasterizer import TorchRenderer

ArrayLike = Union[np.ndarray, torch.Tensor]


def as_tensor(values: ArrayLike, dtype=torch.float64) -> torch.Tensor:
    if torch.is_tensor(values):
        return values.to(dtype)
    return torch.as_tensor(np.asarray(values), dtype=dtype)


def _index(values: ArrayLike) -> torch.Tensor:
    return torch.as_tensor(np.asarray(values), dtype=torch.long)


def vertex_normals_torch(vertices: torch.Tensor,
                         faces: ArrayLike,
                         area_eps: float = NORMAL_AREA_EPS) -> torch.Tensor:
    """
    Differentiable area-weighted vertex normals.

    Faces with area below `area_eps` are skipped; a vertex whose accumulated
    normal vanishes gets (0, 0, 1).
    """
    faces = _index(faces)
    v0, v1, v2 = (vertices[faces[:, k]] for k in range(3))
    cross = torch.linalg.cross(v1 - v0, v2 - v0, dim=1)
    area2 = (cross * cross).sum(dim=1)
    keep = 0.25 * area2.detach() >= area_eps ** 2
    cross = cross * keep[:, None].to(cross.dtype)

    accumulated = torch.zeros_like(vertices)
    for k in range(3):
        accumulated = accumulated.index_add(0, faces[:, k], cross)

    norm2 = (accumulated * accumulated).sum(dim=1, keepdim=True)
    nonzero = norm2 > 0
    safe = torch.where(nonzero, norm2, torch.ones_like(norm2))
    fallback = torch.tensor([0.0, 0.0, 1.0], dtype=vertices.dtype).expand_as(vertices)
    return torch.where(nonzero, accumulated / torch.sqrt(safe), fallback)


def loss_edge(vertices: torch.Tensor, edges: EdgeSet) -> torch.Tensor:
    """Mean over edges of (|v_i - v_j| - rest)^2."""
    if len(edges) == 0:
        return vertices.new_zeros(())
    pairs = _index(edges.edges)
    rest = as_tensor(edges.rest_lengths, vertices.dtype)
    lengths = torch.linalg.norm(vertices[pairs[:, 0]] - vertices[pairs[:, 1]], dim=1)
    return ((lengths - rest) ** 2).mean()


def loss_reg_visible(vertices: torch.Tensor,
                     anchors: ArrayLike,
                     subset: Optional[ArrayLike] = None) -> torch.Tensor:
    """Mean over `subset` (all vertices when None) of |v - anchor|^2."""
    anchors = as_tensor(anchors, vertices.dtype)
    if subset is not None:
        index = _index(subset)
        if index.numel() == 0:
            return vertices.new_zeros(())
        vertices, anchors = vertices[index], anchors[index]
    return ((vertices - anchors) ** 2).sum(dim=1).mean()


def loss_normal_render(vertices: torch.Tensor,
                       faces: ArrayLike,
                       renderers: Dict[str, TorchRenderer],
                       targets: Dict[str, AttributeImage],
                       area_eps: float = NORMAL_AREA_EPS) -> torch.Tensor:
    """
    Sum over views of the masked-mean L1 between the rendered, RGB-encoded
    vertex normals and the target normal image.
    """
    rgb = 0.5 * (vertex_normals_torch(vertices, faces, area_eps) + 1.0)
    return _render_l1(rgb, renderers, targets)


def loss_position_render(vertices: torch.Tensor,
                         renderers: Dict[str, TorchRenderer],
                         targets: Dict[str, AttributeImage],
                         bounds: PositionBounds) -> torch.Tensor:
    """
    Sum over views of the masked-mean L1 between rendered, RGB-encoded
    positions and the target position image.

    `bounds` must be in the unit of `vertices`.
    """
    low = as_tensor(bounds.low, vertices.dtype)
    extent = as_tensor(bounds.extent, vertices.dtype)
    return _render_l1((vertices - low) / extent, renderers, targets)


def _render_l1(rgb: torch.Tensor,
               renderers: Dict[str, TorchRenderer],
               targets: Dict[str, AttributeImage]) -> torch.Tensor:
    total = rgb.new_zeros(())
    for view in sorted(renderers):
        renderer = renderers[view]
        covered = renderer.covered(rgb)
        if covered.shape[0] == 0:
            continue
        target = as_tensor(targets[view].pixels.reshape(-1, 3), rgb.dtype)[renderer.pixels]
        total = total + (covered - target).abs().mean()
    return total


def loss_normal_consistency(vertices: torch.Tensor,
                            faces: ArrayLike,
                            edges: EdgeSet,
                            area_eps: float = NORMAL_AREA_EPS) -> torch.Tensor:
    """Mean over edges of 1 - n_i . n_j."""
    if len(edges) == 0:
        return vertices.new_zeros(())
    normals = vertex_normals_torch(vertices, faces, area_eps)
    pairs = _index(edges.edges)
    return (1.0 - (normals[pairs[:, 0]] * normals[pairs[:, 1]]).sum(dim=1)).mean()


def loss_collision(vertices: torch.Tensor, body: BodyCollider) -> torch.Tensor:
    """
    (1 / N) * sum of max(0, -sdf(v)), linearized at the current closest points.

    Closest points and their pseudo-normals are held fixed for the gradient,
    which therefore pushes penetrating vertices along the pseudo-normal.
    """
    contact = body.query(vertices.detach().cpu().numpy())
    closest = as_tensor(contact.closest_point, vertices.dtype)
    normal = as_tensor(contact.pseudo_normal, vertices.dtype)
    depth = -((vertices - closest) * normal).sum(dim=1)
    return torch.relu(depth).sum() / vertices.shape[0]


def penetrating_count(vertices: np.ndarray, body: BodyCollider) -> int:
    """Number of vertices with negative signed distance."""
    return int(np.count_nonzero(body.query(vertices).distance < 0))
