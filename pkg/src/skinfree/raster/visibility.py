"""
Per-vertex visibility against a template raster, and sub-pixel sampling of
attribute images at projected vertex locations.
"""

import dataclasses

import numpy as np

from ..errors import DataError
from ..mesh.trimesh import TriMesh
from .camera import CameraRig, check_view
from .encoding import AttributeImage
from .rasterizer import RasterMap

# Visibility depth slack as a fraction of the template bounding-box diagonal.
VISIBILITY_EPS_FRACTION = 1e-3


@dataclasses.dataclass(frozen=True)
class VisibilityTable:
    """
    Visibility of every template vertex in one view.

    Attributes:
        view: View label
        visible: (N,) flags
        coords: (N, 2) projected pixel coordinates (x, y)
        depth: (N,) view depth of each vertex in mm
        margin: (N,) smallest (surface depth - vertex depth) over the 3x3
            pixel neighbourhood; larger means a more frontal observation
    """
    view: str
    visible: np.ndarray
    coords: np.ndarray
    depth: np.ndarray
    margin: np.ndarray

    @property
    def visible_indices(self) -> np.ndarray:
        return np.flatnonzero(self.visible)


def _incident(faces: np.ndarray, face_ids: np.ndarray, vertex_ids: np.ndarray) -> np.ndarray:
    corners = faces[np.maximum(face_ids, 0)]
    return (face_ids >= 0) & np.any(corners == vertex_ids[:, None], axis=1)


def vertex_visibility(template: TriMesh,
                      raster: RasterMap,
                      rig: CameraRig,
                      view: str) -> VisibilityTable:
    """
    Decide which template vertices survive the depth test in a view.

    The reference surface is the covering face of the nearest covered pixel
    centre (searched over the 2x2 bilinear neighbourhood when the containing
    pixel is empty). A vertex is visible when that face is one of its own
    faces, or when the vertex is no deeper than that face's plane along the
    vertex's camera ray plus eps = 1e-3 x bounding-box diagonal.

    Args:
        template: Garment template
        raster: Template raster of the view
        rig: Camera rig
        view: "front" or "back"

    Returns:
        VisibilityTable for the view
    """
    camera = rig[check_view(view)]
    res = raster.resolution
    n = template.num_vertices
    coords, depth = camera.project(template.vertices)
    eps = VISIBILITY_EPS_FRACTION * template.bbox_diagonal()

    in_image = (
        np.isfinite(coords).all(axis=1) & (depth > 0)
        & (coords[:, 0] >= 0) & (coords[:, 0] < res)
        & (coords[:, 1] >= 0) & (coords[:, 1] < res)
    )
    safe = np.where(in_image[:, None], coords, 0.5)

    # Candidate pixels: the containing pixel first, then the 2x2 neighbourhood
    # ordered by distance to the projected vertex.
    base_c = np.floor(safe[:, 0] - 0.5).astype(np.int64)
    base_r = np.floor(safe[:, 1] - 0.5).astype(np.int64)
    cand_c = [np.floor(safe[:, 0]).astype(np.int64)]
    cand_r = [np.floor(safe[:, 1]).astype(np.int64)]
    for dr in (0, 1):
        for dc in (0, 1):
            cand_c.append(base_c + dc)
            cand_r.append(base_r + dr)
    cand_c = np.stack(cand_c, axis=1)
    cand_r = np.stack(cand_r, axis=1)
    dist = (cand_c + 0.5 - safe[:, :1]) ** 2 + (cand_r + 0.5 - safe[:, 1:]) ** 2
    dist[:, 0] = -1.0
    inside = (cand_c >= 0) & (cand_c < res) & (cand_r >= 0) & (cand_r < res)
    face_at = np.where(
        inside, raster.face_index[np.clip(cand_r, 0, res - 1), np.clip(cand_c, 0, res - 1)], -1
    )
    dist = np.where(face_at >= 0, dist, np.inf)
    pick = np.argmin(dist, axis=1)
    rows = np.arange(n)
    face = np.where(np.isfinite(dist[rows, pick]), face_at[rows, pick], -1)

    # Depth of the reference face's plane along the camera ray through the vertex.
    has_face = in_image & (face >= 0)
    corners = template.faces[np.maximum(face, 0)]
    a = template.vertices[corners[:, 0]]
    normal = np.cross(template.vertices[corners[:, 1]] - a, template.vertices[corners[:, 2]] - a)
    ray = template.vertices - camera.position
    denom = np.einsum("ij,ij->i", normal, ray)
    numer = np.einsum("ij,ij->i", normal, a - camera.position)
    scale = np.linalg.norm(normal, axis=1) * np.linalg.norm(ray, axis=1)
    edge_on = np.abs(denom) <= 1e-9 * scale
    raster_depth = raster.depth[np.clip(cand_r[rows, pick], 0, res - 1),
                                np.clip(cand_c[rows, pick], 0, res - 1)]
    plane_depth = np.where(edge_on, raster_depth,
                           numer / np.where(edge_on, 1.0, denom) * depth)

    own_face = _incident(template.faces, face, np.arange(n))
    visible = has_face & (own_face | (depth <= plane_depth + eps))

    # Depth margin over the 3x3 neighbourhood of the containing pixel.
    margin = np.full(n, np.inf)
    cc, rr = cand_c[:, 0], cand_r[:, 0]
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            d = raster.depth[np.clip(rr + dr, 0, res - 1), np.clip(cc + dc, 0, res - 1)]
            margin = np.minimum(margin, d - depth)
    margin = np.where(visible & np.isfinite(margin), margin, -np.inf)

    return VisibilityTable(view, visible, coords, depth, margin)


def sample_image_bilinear(image: AttributeImage, coords: np.ndarray) -> np.ndarray:
    """
    Bilinearly sample an attribute image at continuous pixel coordinates.

    Neighbours that are background or outside the image are dropped and the
    remaining weights renormalized.

    Args:
        image: Attribute image
        coords: (2,) or (N, 2) pixel coordinates (x, y); centres sit at +0.5

    Returns:
        (3,) or (N, 3) sampled values

    Raises:
        DataError: If all four neighbours of a sample are background
    """
    coords = np.asarray(coords, dtype=np.float64)
    single = coords.ndim == 1
    coords = coords.reshape(-1, 2)
    res = image.resolution

    x = coords[:, 0] - 0.5
    y = coords[:, 1] - 0.5
    c0 = np.floor(x).astype(np.int64)
    r0 = np.floor(y).astype(np.int64)
    tx = x - c0
    ty = y - r0

    total = np.zeros((len(coords), 3))
    weight_sum = np.zeros(len(coords))
    valid_count = np.zeros(len(coords))
    valid_total = np.zeros((len(coords), 3))
    for dr, wy in ((0, 1.0 - ty), (1, ty)):
        for dc, wx in ((0, 1.0 - tx), (1, tx)):
            r = r0 + dr
            c = c0 + dc
            inside = (r >= 0) & (r < res) & (c >= 0) & (c < res)
            rc = np.clip(r, 0, res - 1)
            cc = np.clip(c, 0, res - 1)
            valid = inside & image.mask[rc, cc]
            value = image.pixels[rc, cc]
            w = np.where(valid, wx * wy, 0.0)
            total += w[:, None] * value
            weight_sum += w
            valid_count += valid
            valid_total += valid[:, None] * value

    if np.any(valid_count == 0):
        first = int(np.flatnonzero(valid_count == 0)[0])
        raise DataError(
            f"{image.view} {image.kind} image: sample {first} at {coords[first].tolist()} "
            "has only background neighbours"
        )

    # A sample sitting exactly on background pixel centres averages its valid neighbours.
    degenerate = weight_sum <= 0
    weight_sum = np.where(degenerate, valid_count, weight_sum)
    total = np.where(degenerate[:, None], valid_total, total)
    result = total / weight_sum[:, None]
    return result[0] if single else result
