"""
Evaluation metrics: per-vertex RMSE, vertex-set Hausdorff distance,
spatio-temporal edge difference (STED) and body penetration rate.
"""

import dataclasses
import json
import logging
import os
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ..errors import DataError, GeometryError
from ..geometry.sdf import BodyCollider
from ..mesh.trimesh import EdgeSet, TriMesh

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def rmse(pred: TriMesh, gt: TriMesh) -> float:
    """
    Root mean squared per-vertex distance in mm.

    Raises:
        DataError: If the vertex counts differ
    """
    if pred.num_vertices != gt.num_vertices:
        raise DataError(f"vertex counts differ: {pred.num_vertices} vs {gt.num_vertices}")
    diff = pred.vertices - gt.vertices
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))


def hausdorff(pred: TriMesh, gt: TriMesh) -> float:
    """Symmetric Hausdorff distance between the two vertex sets in mm."""
    if pred.num_vertices == 0 or gt.num_vertices == 0:
        raise GeometryError("hausdorff distance of an empty mesh")
    forward, _ = cKDTree(gt.vertices).query(pred.vertices)
    backward, _ = cKDTree(pred.vertices).query(gt.vertices)
    return float(max(forward.max(), backward.max()))


@dataclasses.dataclass(frozen=True)
class StedResult:
    spatial: float
    temporal: float

    @property
    def sted(self) -> float:
        return float(np.hypot(self.spatial, self.temporal))

    def to_dict(self) -> Dict[str, float]:
        return {"spatial": self.spatial, "temporal": self.temporal, "sted": self.sted}


def relative_edge_errors(pred_clip: Sequence[TriMesh],
                         gt_clip: Sequence[TriMesh],
                         edges: EdgeSet) -> np.ndarray:
    """(F, E) relative edge-length errors (|e_pred| - |e_gt|) / |e_gt|."""
    i, j = edges.edges[:, 0], edges.edges[:, 1]
    errors = []
    for pred, gt in zip(pred_clip, gt_clip):
        gt_len = np.linalg.norm(gt.vertices[i] - gt.vertices[j], axis=1)
        pred_len = np.linalg.norm(pred.vertices[i] - pred.vertices[j], axis=1)
        if np.any(gt_len <= 0):
            raise GeometryError(f"{gt.name}: zero-length ground-truth edge")
        errors.append((pred_len - gt_len) / gt_len)
    return np.asarray(errors)


def sted(pred_clip: Sequence[TriMesh],
         gt_clip: Sequence[TriMesh],
         edges: EdgeSet) -> StedResult:
    """
    Spatio-temporal edge difference of a clip.

    spatial: RMS over frames and edges of the relative edge-length error.
    temporal: RMS over edges and consecutive frames of the change of that error.
    The combined value is sqrt(spatial^2 + temporal^2).

    Raises:
        DataError: On an empty clip or mismatched clip lengths
    """
    if len(pred_clip) < 1:
        raise DataError("sted needs at least one frame")
    if len(pred_clip) != len(gt_clip):
        raise DataError(f"clip lengths differ: {len(pred_clip)} vs {len(gt_clip)}")
    errors = relative_edge_errors(pred_clip, gt_clip, edges)
    spatial = float(np.sqrt(np.mean(errors ** 2)))
    temporal = float(np.sqrt(np.mean(np.diff(errors, axis=0) ** 2))) if len(errors) > 1 else 0.0
    return StedResult(spatial, temporal)


def collision_rate(pred: TriMesh, body: BodyCollider) -> float:
    """Fraction of garment vertices with negative signed distance to the body."""
    if pred.num_vertices == 0:
        return 0.0
    return float(np.mean(body.query(pred.vertices).distance < 0))


@dataclasses.dataclass
class ClipEval:
    """
    Metrics of one clip.

    Attributes:
        frames: Frame names
        rmse: Per-frame RMSE in mm
        hausdorff: Per-frame Hausdorff distance in mm
        collision: Per-frame penetrating-vertex fraction
        sted: Clip STED components
    """
    frames: List[str]
    rmse: List[float]
    hausdorff: List[float]
    collision: List[float]
    sted: StedResult

    def aggregate(self) -> Dict[str, float]:
        return {
            "rmse": float(np.mean(self.rmse)),
            "hausdorff": float(np.mean(self.hausdorff)),
            "collision": float(np.mean(self.collision)),
            **self.sted.to_dict(),
        }

    def to_dict(self) -> dict:
        return {
            "frames": [
                {"name": name, "rmse": r, "hausdorff": h, "collision": c}
                for name, r, h, c in zip(self.frames, self.rmse, self.hausdorff, self.collision)
            ],
            "aggregate": self.aggregate(),
        }


def evaluate_clip(preds: Sequence[TriMesh],
                  gts: Sequence[TriMesh],
                  bodies: Sequence[TriMesh],
                  edges: EdgeSet,
                  names: Optional[Sequence[str]] = None) -> ClipEval:
    """
    Evaluate predicted frames against ground truth.

    Args:
        preds: Predicted garments
        gts: Ground-truth garments, same topology and order
        bodies: Bodies of the frames, for the collision rate
        edges: Edge set of the shared topology
        names: Frame names (defaults to indices)

    Returns:
        ClipEval
    """
    if not (len(preds) == len(gts) == len(bodies)):
        raise DataError("prediction, ground-truth and body counts differ")
    names = list(names) if names is not None else [str(i) for i in range(len(preds))]
    result = ClipEval(
        names,
        [rmse(p, g) for p, g in zip(preds, gts)],
        [hausdorff(p, g) for p, g in zip(preds, gts)],
        [collision_rate(p, BodyCollider(b)) for p, b in zip(preds, bodies)],
        sted(preds, gts, edges),
    )
    logger.info("evaluated %d frames: %s", len(names),
                ", ".join(f"{k}={v:.4g}" for k, v in result.aggregate().items()))
    return result


def write_report(path: str, evaluations: Dict[str, ClipEval]):
    """Write one or more named clip evaluations as a JSON report."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        json.dump({
            "schema_version": SCHEMA_VERSION,
            "methods": {name: ev.to_dict() for name, ev in evaluations.items()},
        }, f, indent=2)
