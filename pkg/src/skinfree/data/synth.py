"""
Procedural bodies, garment templates and pose-driven ground-truth
deformations.

Bodies are capsule chains hanging along -y from a root joint at the origin
and bending about +z. Garments are open tubes or flat sheets placed around
(or in front of) the rest body. A ground-truth deformation blends the rigid
motions of the chain segments along the garment's length, adds
pose-dependent wrinkles along the template normals, and finally pushes any
vertex closer than a margin out of the body.
"""

import dataclasses
import logging
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from ..errors import GeometryError
from ..geometry.sdf import BodyCollider
from ..mesh.trimesh import TriMesh, vertex_normals
from ..utils.config import dataclass_from_dict

logger = logging.getLogger(__name__)

TOPOLOGIES = ("tube", "sheet")
PROJECTION_ROUNDS = 10
PROJECTION_TOLERANCE = 1e-3


@dataclasses.dataclass(frozen=True)
class BodyRig:
    """
    Capsule chain: segment k runs from joint k to joint k + 1.

    Attributes:
        segment_lengths: Length of every segment in mm
        radii: Radius at every joint in mm (one more than segments)
        ring_segments: Vertices per cross-section ring
        rings_per_segment: Ring spacing along each segment
        cap_rings: Latitude rings of each hemispherical end cap
    """
    segment_lengths: Tuple[float, ...] = (250.0, 250.0, 250.0)
    radii: Tuple[float, ...] = (100.0, 120.0, 110.0, 90.0)
    ring_segments: int = 48
    rings_per_segment: int = 8
    cap_rings: int = 6

    def __post_init__(self):
        lengths = tuple(float(x) for x in self.segment_lengths)
        radii = tuple(float(x) for x in self.radii)
        object.__setattr__(self, "segment_lengths", lengths)
        object.__setattr__(self, "radii", radii)
        if not lengths or min(lengths) <= 0:
            raise ValueError("segment lengths must be positive")
        if len(radii) != len(lengths) + 1:
            raise ValueError(f"need {len(lengths) + 1} joint radii, got {len(radii)}")
        if min(radii) <= 0:
            raise ValueError("radii must be positive")
        if self.ring_segments < 8 or self.rings_per_segment < 1 or self.cap_rings < 2:
            raise ValueError("body tessellation too coarse")

    @property
    def num_segments(self) -> int:
        return len(self.segment_lengths)

    @property
    def pose_size(self) -> int:
        """Number of bend angles, one per inner joint."""
        return self.num_segments - 1

    def check_pose(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.shape != (self.pose_size,):
            raise GeometryError(f"pose needs {self.pose_size} angles, got {theta.shape[0]}")
        if not np.all(np.isfinite(theta)) or np.any(np.abs(theta) > np.pi / 2):
            raise GeometryError(f"bend angles must lie in [-pi/2, pi/2]: {theta.tolist()}")
        return theta

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BodyRig":
        return dataclass_from_dict(cls, data, "synth.body")

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["segment_lengths"] = list(self.segment_lengths)
        data["radii"] = list(self.radii)
        return data


@dataclasses.dataclass(frozen=True)
class GarmentSpec:
    """
    Garment template parameters.

    Attributes:
        topology: "tube" (open cylinder) or "sheet" (flat panel in front of the body)
        kind: Garment label, selects per-garment fusion presets
        rings: Rows of vertices from top to bottom
        segments: Vertices per row
        radius: Tube radius, or sheet half-width, in mm
        length: Top-to-bottom extent in mm
        top: Height of the top row (the attachment ring) in mm
        attachment_rings: Rows pinned to the body
    """
    topology: str = "tube"
    kind: str = "dress"
    rings: int = 32
    segments: int = 64
    radius: float = 170.0
    length: float = 560.0
    top: float = -20.0
    attachment_rings: int = 1

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown garment topology '{self.topology}'")
        if self.rings < 8 or self.segments < 8:
            raise ValueError(f"garment resolution must be at least 8x8, got "
                             f"{self.rings}x{self.segments}")
        if self.radius <= 0 or self.length <= 0:
            raise ValueError("garment radius and length must be positive")
        if not 1 <= self.attachment_rings < self.rings:
            raise ValueError("attachment_rings must lie in [1, rings)")

    @property
    def num_vertices(self) -> int:
        return self.rings * self.segments

    @property
    def num_faces(self) -> int:
        columns = self.segments if self.topology == "tube" else self.segments - 1
        return 2 * columns * (self.rings - 1)

    def attachment_indices(self) -> np.ndarray:
        return np.arange(self.attachment_rings * self.segments)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GarmentSpec":
        return dataclass_from_dict(cls, data, "synth.garment")

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class DeformationModel:
    """
    Ground-truth deformation parameters.

    Attributes:
        amplitude: Wrinkle amplitude A in mm
        waves: Wrinkle wave count k around the garment
        phase_coeff: c in the pose-dependent phase c * sum(theta)
        margin: Collision margin m in mm
        blend_width: Half-width in mm of the transition between segment motions
        fade_length: Distance below the attachment ring over which wrinkles ramp up
        seed: Seeds the base wrinkle phase
    """
    amplitude: float = 15.0
    waves: int = 6
    phase_coeff: float = 3.0
    margin: float = 5.0
    blend_width: float = 80.0
    fade_length: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("wrinkle amplitude must be non-negative")
        if self.margin <= 0:
            raise ValueError("collision margin must be positive")
        if self.blend_width <= 0 or self.fade_length <= 0:
            raise ValueError("blend_width and fade_length must be positive")

    @property
    def base_phase(self) -> float:
        return float(np.random.default_rng(self.seed).uniform(0.0, 2.0 * np.pi))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DeformationModel":
        return dataclass_from_dict(cls, data, "synth.deformation")

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def forward_kinematics(rig: BodyRig, theta) -> Tuple[np.ndarray, np.ndarray]:
    """
    Joint positions and cumulative segment angles of a posed chain.

    Args:
        rig: Body rig
        theta: Bend angle at every inner joint

    Returns:
        (joints (n + 1, 3), segment angles (n,))
    """
    theta = rig.check_pose(theta)
    angles = np.concatenate([[0.0], np.cumsum(theta)])
    joints = np.zeros((rig.num_segments + 1, 3))
    for k, (length, angle) in enumerate(zip(rig.segment_lengths, angles)):
        joints[k + 1] = joints[k] + length * np.array([np.sin(angle), -np.cos(angle), 0.0])
    return joints, angles


def _segment_distance(p1, q1, p2, q2) -> float:
    """Closest distance between segments p1q1 and p2q2."""
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    c, b = d1 @ r, d1 @ d2
    denom = a * e - b * b
    s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-12 else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
    elif t > 1.0:
        t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm((p1 + d1 * s) - (p2 + d2 * t)))


def _check_self_intersection(rig: BodyRig, joints: np.ndarray):
    for i in range(rig.num_segments):
        for j in range(i + 2, rig.num_segments):
            gap = _segment_distance(joints[i], joints[i + 1], joints[j], joints[j + 1])
            reach = max(rig.radii[i:i + 2]) + max(rig.radii[j:j + 2])
            if gap < reach:
                raise GeometryError(
                    f"pose self-intersects: segments {i} and {j} are {gap:.1f} mm apart, "
                    f"need {reach:.1f} mm"
                )


def _grid_faces(rows: int, columns: int, closed: bool) -> np.ndarray:
    """Two outward-wound triangles per quad of a row-major vertex grid."""
    span = columns if closed else columns - 1
    i, j = np.meshgrid(np.arange(rows - 1), np.arange(span), indexing="ij")
    a = i * columns + j
    b = i * columns + (j + 1) % columns
    c = a + columns
    d = b + columns
    first = np.stack([a, c, b], axis=-1).reshape(-1, 3)
    second = np.stack([b, c, d], axis=-1).reshape(-1, 3)
    return np.stack([first, second], axis=1).reshape(-1, 3)


def make_body(rig: BodyRig, theta=None) -> TriMesh:
    """
    Build the watertight posed body.

    Args:
        rig: Body rig
        theta: Bend angles (defaults to the rest pose)

    Returns:
        Closed capsule-chain mesh with outward winding

    Raises:
        GeometryError: If the pose makes non-adjacent segments collide
    """
    if theta is None:
        theta = np.zeros(rig.pose_size)
    joints, angles = forward_kinematics(rig, theta)
    _check_self_intersection(rig, joints)

    n = rig.num_segments
    phi = 2.0 * np.pi * np.arange(rig.ring_segments) / rig.ring_segments
    z_axis = np.array([0.0, 0.0, 1.0])

    def ring(center, tangent, radius, stretch=1.0):
        side = np.cross(z_axis, tangent)
        return (center + radius * (stretch * np.sin(phi)[:, None] * side
                                   + np.cos(phi)[:, None] * z_axis))

    directions = np.stack([np.sin(angles), -np.cos(angles), np.zeros(n)], axis=1)
    joint_rings = []
    for k in range(n + 1):
        if k == 0:
            tangent, stretch = directions[0], 1.0
        elif k == n:
            tangent, stretch = directions[-1], 1.0
        else:
            tangent = directions[k - 1] + directions[k]
            tangent /= np.linalg.norm(tangent)
            stretch = 1.0 / np.cos(0.5 * (angles[k] - angles[k - 1]))
        joint_rings.append(ring(joints[k], tangent, rig.radii[k], stretch))

    rings = []
    top_dir, bottom_dir = directions[0], directions[-1]
    for k in range(rig.cap_rings - 1, 0, -1):
        beta = 0.5 * np.pi * k / rig.cap_rings
        rings.append(ring(joints[0] - top_dir * rig.radii[0] * np.sin(beta),
                          top_dir, rig.radii[0] * np.cos(beta)))
    for k in range(n):
        rings.append(joint_rings[k])
        for i in range(1, rig.rings_per_segment):
            t = i / rig.rings_per_segment
            rings.append((1.0 - t) * joint_rings[k] + t * joint_rings[k + 1])
    rings.append(joint_rings[n])
    for k in range(1, rig.cap_rings):
        beta = 0.5 * np.pi * k / rig.cap_rings
        rings.append(ring(joints[n] + bottom_dir * rig.radii[-1] * np.sin(beta),
                          bottom_dir, rig.radii[-1] * np.cos(beta)))

    m = rig.ring_segments
    stacked = np.concatenate(rings, axis=0)
    top_pole = len(stacked)
    bottom_pole = top_pole + 1
    vertices = np.concatenate([
        stacked,
        (joints[0] - top_dir * rig.radii[0])[None],
        (joints[n] + bottom_dir * rig.radii[-1])[None],
    ])

    j = np.arange(m)
    last = (len(rings) - 1) * m
    faces = np.concatenate([
        _grid_faces(len(rings), m, closed=True),
        np.stack([np.full(m, top_pole), j, (j + 1) % m], axis=1),
        np.stack([last + j, np.full(m, bottom_pole), last + (j + 1) % m], axis=1),
    ])
    return TriMesh(vertices, faces, name="body")


def make_garment_template(spec: GarmentSpec,
                          rig: BodyRig,
                          margin: float = 5.0) -> TriMesh:
    """
    Build the canonical garment template around the rest body.

    Args:
        spec: Garment parameters
        rig: Body rig the garment is fitted to
        margin: Required clearance from the rest body in mm

    Returns:
        Template mesh; row 0 is the attachment ring

    Raises:
        GeometryError: If any vertex is closer than `margin` to the rest body
    """
    heights = spec.top - spec.length * np.arange(spec.rings) / (spec.rings - 1)
    if spec.topology == "tube":
        phi = 2.0 * np.pi * np.arange(spec.segments) / spec.segments
        x = np.tile(spec.radius * np.sin(phi), spec.rings)
        z = np.tile(spec.radius * np.cos(phi), spec.rings)
    else:
        x = np.tile(np.linspace(-spec.radius, spec.radius, spec.segments), spec.rings)
        z = np.full(spec.num_vertices, spec.radius)
    y = np.repeat(heights, spec.segments)
    vertices = np.stack([x, y, z], axis=1)
    faces = _grid_faces(spec.rings, spec.segments, closed=spec.topology == "tube")
    template = TriMesh(vertices, faces, name=f"{spec.kind}_template").validate_template()

    clearance = BodyCollider(make_body(rig)).query(template.vertices).distance
    if clearance.min() < margin:
        worst = int(np.argmin(clearance))
        raise GeometryError(
            f"garment spec too tight: vertex {worst} is {clearance[worst]:.2f} mm from the "
            f"rest body, margin is {margin} mm"
        )
    logger.debug("garment template %s: %d vertices, %d faces",
                 template.name, template.num_vertices, template.num_faces)
    return template


def _smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def segment_weights(rig: BodyRig, arclength: np.ndarray, blend_width: float) -> np.ndarray:
    """
    Partition-of-unity weights of every chain segment along the chain.

    Returns:
        (N, num_segments) non-negative weights summing to 1 per row
    """
    width = min(blend_width, 0.5 * min(rig.segment_lengths))
    starts = np.cumsum((0.0,) + rig.segment_lengths[:-1])
    passed = [_smoothstep((arclength - starts[j] + width) / (2.0 * width))
              for j in range(1, rig.num_segments)]
    weights = np.zeros((len(arclength), rig.num_segments))
    weights[:, 0] = 1.0 - passed[0] if passed else 1.0
    for k in range(1, rig.num_segments):
        weights[:, k] = passed[k - 1] - (passed[k] if k < rig.num_segments - 1 else 0.0)
    return weights


def wrinkle_displacement(template: TriMesh,
                         model: DeformationModel,
                         theta,
                         top: Optional[float] = None) -> np.ndarray:
    """
    Pose-dependent wrinkles A * sin(k u + phase) along the template normals.

    `u` is the angle about the chain axis; the amplitude ramps up from zero
    at height `top` (the top row when omitted) over `fade_length`.
    """
    theta = np.asarray(theta, dtype=np.float64)
    v = template.vertices
    u = np.arctan2(v[:, 0], v[:, 2])
    if top is None:
        top = v[:, 1].max()
    fade = np.clip((top - v[:, 1]) / model.fade_length, 0.0, 1.0)
    phase = model.base_phase + model.phase_coeff * float(np.sum(theta))
    wave = model.amplitude * fade * np.sin(model.waves * u + phase)
    return wave[:, None] * vertex_normals(template)


def project_out_of_body(vertices: np.ndarray,
                        collider: BodyCollider,
                        margin: float) -> np.ndarray:
    """
    Move every vertex with signed distance below `margin` to distance `margin`
    along the distance gradient.
    """
    vertices = np.array(vertices, dtype=np.float64)
    for _ in range(PROJECTION_ROUNDS):
        result = collider.query(vertices)
        close = result.distance < margin
        if not np.any(close):
            break
        offset = vertices[close] - result.closest_point[close]
        length = np.linalg.norm(offset, axis=1, keepdims=True)
        sign = np.where(result.distance[close] < 0, -1.0, 1.0)[:, None]
        direction = np.where(length > 1e-12, sign * offset / np.where(length > 0, length, 1.0),
                             result.pseudo_normal[close])
        vertices[close] = result.closest_point[close] + margin * direction
    return vertices


def top_row(template: TriMesh) -> np.ndarray:
    """Indices of the template vertices at the greatest height."""
    y = template.vertices[:, 1]
    return np.flatnonzero(np.isclose(y, y.max()))


def gt_deform(template: TriMesh,
              model: DeformationModel,
              rig: BodyRig,
              theta,
              body: Optional[TriMesh] = None,
              attachment: Optional[Sequence[int]] = None) -> TriMesh:
    """
    Ground-truth posed garment for pose `theta`, in the canonical frame.

    Attachment vertices move rigidly with the root segment; wrinkles start
    below the lowest of them.

    Args:
        template: Canonical garment template
        model: Deformation parameters
        rig: Body rig
        theta: Bend angles
        body: Posed body; built from (rig, theta) when omitted
        attachment: Pinned vertex indices, e.g. GarmentSpec.attachment_indices();
            the top row when omitted

    Returns:
        Deformed garment with the template's topology
    """
    theta = rig.check_pose(theta)
    rest_joints, _ = forward_kinematics(rig, np.zeros(rig.pose_size))
    joints, angles = forward_kinematics(rig, theta)

    rest = template.vertices
    pinned = top_row(template) if attachment is None else np.asarray(attachment, dtype=np.int64)
    wrinkled = rest + wrinkle_displacement(template, model, theta, top=rest[pinned, 1].min())
    weights = segment_weights(rig, -rest[:, 1], model.blend_width)

    def segment_motion(k, points):
        return (joints[k] - rest_joints[k]) + (points - rest_joints[k]) @ (
            rotation_z(angles[k]) - np.eye(3)).T

    displacement = np.zeros_like(rest)
    for k in range(rig.num_segments):
        displacement += weights[:, k:k + 1] * segment_motion(k, wrinkled)
    deformed = wrinkled + displacement

    if body is None:
        body = make_body(rig, theta)
    deformed = project_out_of_body(deformed, BodyCollider(body), model.margin)
    deformed[pinned] = rest[pinned] + segment_motion(0, rest[pinned])
    return template.with_vertices(deformed, name=f"{template.name}_posed")
