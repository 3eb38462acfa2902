"""
Front/back perspective camera rig framed on a garment template.
"""

import dataclasses
import math
from typing import Dict, Tuple

import numpy as np

from ..errors import ConfigError, GeometryError
from ..mesh.trimesh import TriMesh

VIEWS = ("front", "back")
MIN_RESOLUTION = 8


@dataclasses.dataclass(frozen=True)
class Camera:
    """
    Pinhole camera looking down its local -z axis, y up.

    Attributes:
        view: View label
        fov_deg: Full field of view in degrees (square image)
        rotation: (3, 3) camera-to-world rotation; columns are camera axes
        position: (3,) camera centre in world millimetres
        resolution: Image width and height in pixels
    """
    view: str
    fov_deg: float
    rotation: np.ndarray
    position: np.ndarray
    resolution: int

    @property
    def focal(self) -> float:
        """Focal length in pixels."""
        return 0.5 * self.resolution / math.tan(math.radians(self.fov_deg) / 2)

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.position) @ self.rotation

    def project(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Project world points to continuous pixel coordinates.

        Pixel (row r, column c) covers [c, c+1) x [r, r+1); its centre is
        (c + 0.5, r + 0.5). Rows grow downwards.

        Args:
            points: (N, 3) world positions

        Returns:
            (N, 2) pixel coordinates (x, y) and (N,) positive view depths
        """
        cam = self.to_camera(points)
        depth = -cam[:, 2]
        half = 0.5 * self.resolution
        with np.errstate(divide="ignore", invalid="ignore"):
            x = half + self.focal * cam[:, 0] / depth
            y = half - self.focal * cam[:, 1] / depth
        return np.stack([x, y], axis=1), depth

    def to_dict(self) -> dict:
        return {
            "view": self.view,
            "fov_deg": self.fov_deg,
            "rotation": self.rotation.tolist(),
            "position": self.position.tolist(),
            "resolution": self.resolution,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Camera":
        return cls(
            data["view"],
            float(data["fov_deg"]),
            np.array(data["rotation"], dtype=np.float64),
            np.array(data["position"], dtype=np.float64),
            int(data["resolution"]),
        )


@dataclasses.dataclass(frozen=True)
class CameraRig:
    """The front and back cameras shared by garment and body renders."""
    cameras: Dict[str, Camera]

    def __post_init__(self):
        if tuple(sorted(self.cameras)) != tuple(sorted(VIEWS)):
            raise ConfigError(f"camera rig needs exactly the views {VIEWS}")

    def __getitem__(self, view: str) -> Camera:
        check_view(view)
        return self.cameras[view]

    @property
    def resolution(self) -> int:
        return self.cameras["front"].resolution

    def to_dict(self) -> dict:
        return {view: self.cameras[view].to_dict() for view in VIEWS}

    @classmethod
    def from_dict(cls, data: dict) -> "CameraRig":
        return cls({view: Camera.from_dict(data[view]) for view in VIEWS})


@dataclasses.dataclass(frozen=True)
class CameraConfig:
    """
    Framing settings of the camera rig.

    Attributes:
        resolution: Square image size in pixels
        distance_factor: Camera distance in bounding-sphere radii
        margin: Fraction of the image left free on each side
    """
    resolution: int = 256
    distance_factor: float = 12.0
    margin: float = 0.05

    def __post_init__(self):
        if isinstance(self.resolution, bool) or not isinstance(self.resolution, int) \
                or self.resolution < MIN_RESOLUTION:
            raise ValueError(f"resolution must be an integer >= {MIN_RESOLUTION}, "
                             f"got {self.resolution!r}")
        if self.distance_factor <= 1 or not 0 <= self.margin < 0.5:
            raise ValueError("distance_factor must exceed 1 and margin lie in [0, 0.5)")

    def rig_for(self, template: TriMesh) -> "CameraRig":
        return build_camera_rig(template, self.resolution, self.distance_factor, self.margin)

    @classmethod
    def from_dict(cls, data: dict) -> "CameraConfig":
        # utils imports the raster package, so the helper is imported here
        from ..utils.config import dataclass_from_dict
        return dataclass_from_dict(cls, data, "camera")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def check_view(view: str) -> str:
    if view not in VIEWS:
        raise ConfigError(f"unknown view '{view}', expected one of {VIEWS}")
    return view


def build_camera_rig(template: TriMesh,
                     resolution: int = 256,
                     distance_factor: float = 12.0,
                     margin: float = 0.05) -> CameraRig:
    """
    Frame a template with a front camera on +z and a back camera on -z.

    Both cameras look at the vertex centroid. The camera distance is
    `distance_factor` times the bounding-sphere radius and the field of view
    makes the sphere fill the image up to `margin` on every side.

    Args:
        template: Garment template mesh
        resolution: Square image size in pixels
        distance_factor: Camera distance in bounding-sphere radii
        margin: Fraction of the image left free on each side

    Returns:
        CameraRig with "front" and "back" cameras

    Raises:
        GeometryError: If the template is empty or has zero extent
    """
    if template.num_vertices == 0:
        raise GeometryError("cannot frame an empty template")
    if template.bbox_diagonal() <= 0:
        raise GeometryError(f"{template.name}: zero-extent bounding box")
    if distance_factor <= 1 or not 0 <= margin < 0.5:
        raise ConfigError("distance_factor must exceed 1 and margin lie in [0, 0.5)")

    centroid = template.vertices.mean(axis=0)
    radius = float(np.linalg.norm(template.vertices - centroid, axis=1).max())
    distance = distance_factor * radius

    tan_half = math.tan(math.asin(radius / distance)) / (1.0 - 2.0 * margin)
    fov_deg = math.degrees(2.0 * math.atan(tan_half))

    front = Camera("front", fov_deg, np.eye(3),
                   centroid + np.array([0.0, 0.0, distance]), resolution)
    back = Camera("back", fov_deg, np.diag([-1.0, 1.0, -1.0]),
                  centroid - np.array([0.0, 0.0, distance]), resolution)
    return CameraRig({"front": front, "back": back})
