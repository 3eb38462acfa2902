"""
RGB encoding of vertex attributes and the attribute-image type.
"""

import dataclasses
from typing import Optional

import numpy as np

from ..errors import BoundsError, GeometryError
from .camera import check_view
from .rasterizer import RasterMap, render_pixels

KINDS = ("position", "normal")
OWNERS = ("garment", "body")


@dataclasses.dataclass(frozen=True)
class PositionBounds:
    """
    Axis-aligned box mapped onto the RGB cube by the position encoding.

    Attributes:
        low: (3,) minimum corner in mm
        high: (3,) maximum corner in mm
    """
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        low = np.array(self.low, dtype=np.float64).reshape(3)
        high = np.array(self.high, dtype=np.float64).reshape(3)
        if not np.all(high > low):
            raise GeometryError(f"position bounds need max > min per axis, got {low} / {high}")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def extent(self) -> np.ndarray:
        return self.high - self.low

    @classmethod
    def from_points(cls, points: np.ndarray, inflate: float = 0.1) -> "PositionBounds":
        """
        Bounding box of `points` padded on each side by `inflate` times its extent.

        Flat axes are padded by `inflate` times the largest extent so the box
        never collapses.
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        low, high = points.min(axis=0), points.max(axis=0)
        extent = high - low
        pad = inflate * np.where(extent > 0, extent, extent.max())
        if np.any(pad <= 0):
            raise GeometryError("cannot derive bounds from a single point")
        return cls(low - pad, high + pad)

    def contains(self, points: np.ndarray) -> bool:
        points = np.asarray(points).reshape(-1, 3)
        return bool(np.all(points >= self.low) and np.all(points <= self.high))

    def union(self, other: "PositionBounds") -> "PositionBounds":
        return PositionBounds(np.minimum(self.low, other.low), np.maximum(self.high, other.high))

    def to_dict(self) -> dict:
        return {"low": self.low.tolist(), "high": self.high.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "PositionBounds":
        return cls(np.array(data["low"]), np.array(data["high"]))


@dataclasses.dataclass(frozen=True)
class AttributeImage:
    """
    H x W x 3 image of RGB-encoded vertex attributes.

    Background pixels (mask off) are forced to exactly 0.

    Attributes:
        pixels: (H, W, 3) float64 values, in [0, 1] for encoded attributes
        mask: (H, W) silhouette the image was rendered with
        view: "front" or "back"
        kind: "position" or "normal"
        owner: "garment" or "body"
    """
    pixels: np.ndarray
    mask: np.ndarray
    view: str
    kind: str = "position"
    owner: str = "garment"

    def __post_init__(self):
        check_view(self.view)
        if self.kind not in KINDS or self.owner not in OWNERS:
            raise ValueError(f"invalid image kind/owner: {self.kind}/{self.owner}")
        mask = np.asarray(self.mask, dtype=bool)
        pixels = np.array(self.pixels, dtype=np.float64)
        if pixels.shape != mask.shape + (3,):
            raise ValueError(f"pixel shape {pixels.shape} does not match mask {mask.shape}")
        if not np.all(np.isfinite(pixels)):
            raise ValueError("attribute image contains non-finite pixels")
        pixels[~mask] = 0.0
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "mask", mask)

    @property
    def resolution(self) -> int:
        return self.mask.shape[0]

    def with_pixels(self, pixels: np.ndarray) -> "AttributeImage":
        return AttributeImage(pixels, self.mask, self.view, self.kind, self.owner)


def rgb_encode_positions(positions: np.ndarray, bounds: PositionBounds) -> np.ndarray:
    """
    Map positions into the RGB cube: (p - min) / (max - min).

    Raises:
        BoundsError: Naming the first vertex and axis outside the bounds
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    outside = (positions < bounds.low) | (positions > bounds.high)
    if outside.any():
        vertex, axis = (int(i) for i in np.argwhere(outside)[0])
        raise BoundsError(vertex, axis, positions[vertex, axis],
                          bounds.low[axis], bounds.high[axis])
    return (positions - bounds.low) / bounds.extent


def rgb_decode_positions(rgb: np.ndarray, bounds: PositionBounds) -> np.ndarray:
    """Inverse of rgb_encode_positions."""
    return bounds.low + np.asarray(rgb, dtype=np.float64) * bounds.extent


def rgb_encode_normals(normals: np.ndarray) -> np.ndarray:
    """Map unit normals into the RGB cube: (n + 1) / 2."""
    return (np.asarray(normals, dtype=np.float64) + 1.0) / 2.0


def rgb_decode_normals(rgb: np.ndarray) -> np.ndarray:
    """Map RGB back to unit normals; zero vectors decode to (0, 0, 1)."""
    n = 2.0 * np.asarray(rgb, dtype=np.float64) - 1.0
    norms = np.linalg.norm(n, axis=-1, keepdims=True)
    fallback = np.broadcast_to(np.array([0.0, 0.0, 1.0]), n.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(norms > 0, n / np.where(norms > 0, norms, 1.0), fallback)


def render_attribute(raster: RasterMap,
                     attrs: np.ndarray,
                     kind: str = "position",
                     owner: str = "garment") -> AttributeImage:
    """
    Render per-vertex RGB attributes through a fixed raster.

    Each covered pixel is the barycentric mix of its face's corner values;
    the map is linear in `attrs`.

    Args:
        raster: Raster of the mesh the attributes belong to
        attrs: (N, 3) per-vertex values, N = raster.num_vertices
        kind: Attribute kind recorded on the image
        owner: Garment or body

    Returns:
        AttributeImage of the raster's view
    """
    attrs = np.asarray(attrs, dtype=np.float64)
    if attrs.shape != (raster.num_vertices, 3):
        raise ValueError(
            f"attribute shape {attrs.shape} does not match {raster.num_vertices} vertices"
        )
    return AttributeImage(
        render_pixels(raster, attrs), raster.silhouette.mask, raster.view, kind, owner
    )


def encode_mesh_images(raster: RasterMap,
                       positions: np.ndarray,
                       normals: np.ndarray,
                       bounds: Optional[PositionBounds],
                       owner: str = "garment") -> dict:
    """
    Render the position and normal images of one view.

    Args:
        raster: Raster of the mesh topology
        positions: (N, 3) deformed positions in mm
        normals: (N, 3) unit vertex normals of the deformed mesh
        bounds: Position encoding bounds
        owner: Garment or body

    Returns:
        Dict with "position" and "normal" AttributeImages
    """
    return {
        "position": render_attribute(raster, rgb_encode_positions(positions, bounds),
                                     "position", owner),
        "normal": render_attribute(raster, rgb_encode_normals(normals), "normal", owner),
    }
