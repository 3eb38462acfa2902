"""
Two-stage fusion of transferred position and normal images into a posed
garment mesh.

Stage 1 initializes vertex positions from the position images and smooths
them with an edge-length prior. Stage 2 recovers wrinkles by matching the
rendered vertex normals to the normal images under edge, displacement,
normal-consistency and collision terms. Both stages run Adam in float64 on
positions divided by `length_unit_mm`.
"""

import dataclasses
import json
import logging
import os
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import torch

from ..autodiff.engine import AdamState, Tape, adam_step
from ..errors import DataError, FusionDivergenceError
from ..geometry.sdf import BodyCollider, nearest_in_set
from ..mesh.trimesh import NORMAL_AREA_EPS, TriMesh, edge_set
from ..raster.camera import VIEWS, CameraRig, build_camera_rig
from ..raster.encoding import AttributeImage, PositionBounds, rgb_decode_positions
from ..raster.rasterizer import TorchRenderer, rasterize_template
from ..raster.visibility import VisibilityTable, sample_image_bilinear, vertex_visibility
from ..utils.config import dataclass_from_dict
from .losses import (
    loss_collision,
    loss_edge,
    loss_normal_consistency,
    loss_normal_render,
    loss_position_render,
    loss_reg_visible,
    penetrating_count,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
LAMBDA_RN_PRESETS = {"tshirt": 0.001}
DEFAULT_LAMBDA_RN = 0.01
HIDDEN = -1
# Largest jitter, in length units, behind the divergence reference.
MAX_JITTER = 1e-3


@dataclasses.dataclass(frozen=True)
class FusionConfig:
    """
    Weights and schedule of the fusion.

    Attributes:
        lambda_rv: Displacement regularization weight
        lambda_e: Edge-length weight (stage 2; stage 1 weighs it 1)
        lambda_c: Collision weight
        lambda_rn: Normal-consistency weight; None selects the garment preset
        lambda_rp: Position-rendering weight (0 disables the term)
        lr: Adam learning rate in the optimization unit
        stage1_steps: Adam steps of stage 1
        stage2_steps: Adam steps of stage 2
        seed: Torch seed of each run
        length_unit_mm: Millimetres per optimization unit
        divergence_factor: Abort when a stage's loss exceeds this multiple of its first value,
            floored by the loss of an lr-sized jitter of the start (at most MAX_JITTER)
    """
    lambda_rv: float = 0.02
    lambda_e: float = 100.0
    lambda_c: float = 100.0
    lambda_rn: Optional[float] = DEFAULT_LAMBDA_RN
    lambda_rp: float = 0.0
    lr: float = 1e-3
    stage1_steps: int = 100
    stage2_steps: int = 100
    seed: int = 0
    length_unit_mm: float = 1000.0
    divergence_factor: float = 10.0

    def __post_init__(self):
        weights = (self.lambda_rv, self.lambda_e, self.lambda_c, self.lambda_rp)
        if any(w < 0 for w in weights) or (self.lambda_rn is not None and self.lambda_rn < 0):
            raise ValueError("loss weights must be non-negative")
        if self.stage1_steps <= 0 or self.stage2_steps <= 0:
            raise ValueError("step counts must be positive")
        if self.lr <= 0 or self.length_unit_mm <= 0 or self.divergence_factor <= 1:
            raise ValueError("lr and length unit must be positive, divergence factor above 1")

    def for_garment(self, kind: Optional[str]) -> "FusionConfig":
        """Fill an unset lambda_rn from the per-garment preset."""
        if self.lambda_rn is not None:
            return self
        return dataclasses.replace(self, lambda_rn=LAMBDA_RN_PRESETS.get(kind, DEFAULT_LAMBDA_RN))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FusionConfig":
        return dataclass_from_dict(cls, data, "fusion")

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class FusionState:
    """
    Vertex estimate between stages.

    Attributes:
        vertices: (N, 3) current positions in mm
        source: (N,) view index each vertex was read from, HIDDEN if interpolated
        anchors: (N, 3) targets of the displacement regularizer in mm
        anchor_subset: Vertices the regularizer applies to
        adam: Optimizer state of the last stage, if any
    """
    vertices: np.ndarray
    source: np.ndarray
    anchors: np.ndarray
    anchor_subset: np.ndarray
    adam: Optional[AdamState] = None

    @property
    def visible(self) -> np.ndarray:
        return self.source != HIDDEN


@dataclasses.dataclass
class FusionResult:
    """Output of fuse()."""
    mesh: TriMesh
    initial: TriMesh
    stage1: TriMesh
    trace: List[Dict[str, float]]
    timing: Dict[str, float]
    visibility: Dict[str, float]
    config: FusionConfig


def init_positions(pos_imgs: Dict[str, AttributeImage],
                   vis: Dict[str, VisibilityTable],
                   template: TriMesh,
                   bounds: PositionBounds) -> FusionState:
    """
    Read vertex positions from the position images.

    Visible vertices decode the bilinear sample at their projected template
    location; a vertex visible in both views uses the view with the larger
    depth margin (front on ties). A hidden vertex is interpolated between its
    nearest front-visible vertex a and nearest back-visible vertex b (template
    distances d_a, d_b) with weight d_b / (d_a + d_b) on a.

    Args:
        pos_imgs: Front and back position images
        vis: Front and back visibility tables of the template
        template: Garment template
        bounds: Bounds the images were encoded with

    Returns:
        FusionState whose anchors are the visible vertices' readings

    Raises:
        DataError: If a view sees no vertex
    """
    n = template.num_vertices
    readings = {}
    for view in VIEWS:
        table = vis[view]
        visible = table.visible_indices
        if visible.size == 0:
            raise DataError(f"no template vertex is visible in the {view} view")
        rgb = sample_image_bilinear(pos_imgs[view], table.coords[visible])
        readings[view] = (visible, rgb_decode_positions(rgb, bounds))

    margins = np.stack([vis[view].margin for view in VIEWS])
    seen = np.stack([vis[view].visible for view in VIEWS])
    source = np.where(seen.any(axis=0), np.argmax(np.where(seen, margins, -np.inf), axis=0),
                      HIDDEN)

    vertices = np.zeros((n, 3))
    for index, view in enumerate(VIEWS):
        visible, decoded = readings[view]
        chosen = source[visible] == index
        vertices[visible[chosen]] = decoded[chosen]

    hidden = np.flatnonzero(source == HIDDEN)
    if hidden.size:
        a, d_a = nearest_in_set(hidden, readings["front"][0], template)
        b, d_b = nearest_in_set(hidden, readings["back"][0], template)
        total = d_a + d_b
        w = np.where(total > 0, d_b / np.where(total > 0, total, 1.0), 0.5)[:, None]
        vertices[hidden] = w * vertices[a] + (1.0 - w) * vertices[b]
        logger.debug("interpolated %d hidden vertices", hidden.size)

    visible = np.flatnonzero(source != HIDDEN)
    return FusionState(vertices, source.astype(np.int64), vertices.copy(), visible)


LossTerms = Callable[[torch.Tensor], Dict[str, Tuple[float, torch.Tensor]]]


def _weighted_total(values: Dict[str, Tuple[float, torch.Tensor]],
                    like: torch.Tensor) -> torch.Tensor:
    total = like.new_zeros(())
    for name in sorted(values):
        weight, value = values[name]
        total = total + weight * value
    return total


def _jitter_loss(vertices: torch.Tensor, terms: LossTerms, cfg: FusionConfig) -> float:
    """Loss after moving every coordinate by +-min(lr, MAX_JITTER) with seeded signs."""
    generator = torch.Generator().manual_seed(cfg.seed)
    signs = torch.rand(vertices.shape, generator=generator).lt(0.5).to(vertices.dtype) * 2.0 - 1.0
    with torch.no_grad():
        jittered = vertices.detach() + min(cfg.lr, MAX_JITTER) * signs
        value = float(_weighted_total(terms(jittered), jittered))
    return value if np.isfinite(value) else 0.0


def _optimize(stage: str,
              start_mm: np.ndarray,
              steps: int,
              terms: LossTerms,
              cfg: FusionConfig) -> Tuple[np.ndarray, List[Dict[str, float]], AdamState]:
    torch.manual_seed(cfg.seed)
    unit = cfg.length_unit_mm
    vertices = torch.tensor(start_mm / unit, dtype=torch.float64, requires_grad=True)
    adam = AdamState([vertices], cfg.lr)
    trace: List[Dict[str, float]] = []
    limit = None

    for step in range(steps):
        tape = Tape({"vertices": vertices})
        values = terms(vertices)
        total = _weighted_total(values, vertices)
        entry = {"stage": stage, "step": step, "total": float(total.detach())}
        entry.update({name: float(value.detach()) for name, (_, value) in values.items()})
        trace.append(entry)

        if not np.isfinite(entry["total"]):
            raise FusionDivergenceError("non-finite loss", stage, step, trace)
        if limit is None:
            reference = max(entry["total"], _jitter_loss(vertices, terms, cfg), 1e-12)
            limit = cfg.divergence_factor * reference
        if entry["total"] > limit:
            raise FusionDivergenceError(
                f"loss {entry['total']:.6g} exceeds {cfg.divergence_factor} x initial", stage, step,
                trace)

        grads = tape.backward(total)
        adam_step(adam, [vertices], [grads["vertices"]])
        if step % 25 == 0:
            logger.debug("%s step %d total %.6g", stage, step, entry["total"])

    result = vertices.detach().numpy() * unit
    if not np.all(np.isfinite(result)):
        raise FusionDivergenceError("non-finite vertices", stage, steps, trace)
    logger.info("%s: loss %.6g -> %.6g", stage, trace[0]["total"], trace[-1]["total"])
    return result, trace, adam


def stage1_optimize(state: FusionState,
                    template: TriMesh,
                    cfg: FusionConfig) -> Tuple[FusionState, List[Dict[str, float]]]:
    """
    Smooth the initialization: L_e + lambda_rv * L_rv over the visible vertices.

    Args:
        state: Output of init_positions
        template: Garment template providing rest lengths
        cfg: Fusion settings

    Returns:
        (state with smoothed vertices anchored for stage 2, per-step trace)
    """
    unit = cfg.length_unit_mm
    edges = edge_set(template.with_vertices(template.vertices / unit))
    anchors = state.anchors / unit
    subset = state.anchor_subset

    def terms(v):
        return {
            "edge": (1.0, loss_edge(v, edges)),
            "reg_visible": (cfg.lambda_rv, loss_reg_visible(v, anchors, subset)),
        }

    vertices, trace, adam = _optimize("stage1", state.vertices, cfg.stage1_steps, terms, cfg)
    smoothed = FusionState(vertices, state.source, vertices.copy(),
                           np.arange(template.num_vertices), adam)
    return smoothed, trace


def stage2_optimize(state: FusionState,
                    template: TriMesh,
                    normal_imgs: Dict[str, AttributeImage],
                    renderers: Dict[str, TorchRenderer],
                    body: BodyCollider,
                    cfg: FusionConfig,
                    pos_imgs: Optional[Dict[str, AttributeImage]] = None,
                    bounds: Optional[PositionBounds] = None) -> Tuple[np.ndarray, List[Dict[str, float]]]:
    """
    Recover wrinkles on the full objective
    L_r + lambda_rn L_rn + lambda_e L_e + lambda_rv L_rv + lambda_c L_c
    (+ lambda_rp L_rp when its weight is positive).

    Args:
        state: Stage-1 output; its vertices are the anchors of all vertices
        template: Garment template
        normal_imgs: Front and back target normal images
        renderers: Differentiable renderers over the template rasters
        body: Body collider in mm
        cfg: Fusion settings
        pos_imgs: Position images for the optional position term
        bounds: Position bounds in mm for the optional position term

    Returns:
        (final vertices in mm, per-step trace)
    """
    cfg = cfg.for_garment(None)
    unit = cfg.length_unit_mm
    edges = edge_set(template.with_vertices(template.vertices / unit))
    anchors = state.anchors / unit
    collider = body.scaled(1.0 / unit)
    area_eps = NORMAL_AREA_EPS / unit ** 2
    faces = template.faces
    use_positions = cfg.lambda_rp > 0
    if use_positions and (pos_imgs is None or bounds is None):
        raise DataError("the position rendering term needs position images and bounds")
    if use_positions:
        scaled_bounds = PositionBounds(bounds.low / unit, bounds.high / unit)

    def terms(v):
        values = {
            "normal_render": (1.0, loss_normal_render(v, faces, renderers, normal_imgs, area_eps)),
            "normal_consistency": (cfg.lambda_rn,
                                   loss_normal_consistency(v, faces, edges, area_eps)),
            "edge": (cfg.lambda_e, loss_edge(v, edges)),
            "reg_visible": (cfg.lambda_rv, loss_reg_visible(v, anchors)),
            "collision": (cfg.lambda_c, loss_collision(v, collider)),
        }
        if use_positions:
            values["position_render"] = (cfg.lambda_rp, loss_position_render(
                v, renderers, pos_imgs, scaled_bounds))
        return values

    vertices, trace, _ = _optimize("stage2", state.vertices, cfg.stage2_steps, terms, cfg)
    return vertices, trace


def fuse(pos_imgs: Dict[str, AttributeImage],
         normal_imgs: Dict[str, AttributeImage],
         template: TriMesh,
         body: TriMesh,
         bounds: PositionBounds,
         cfg: FusionConfig = FusionConfig(),
         rig: Optional[CameraRig] = None,
         garment_kind: Optional[str] = None) -> FusionResult:
    """
    Run initialization, stage 1 and stage 2.

    Args:
        pos_imgs: Front and back position images
        normal_imgs: Front and back normal images
        template: Garment template (canonical frame, mm)
        body: Posed body in the same frame
        bounds: Position encoding bounds
        cfg: Fusion settings
        rig: Cameras the images were rendered with; derived from the template when omitted
        garment_kind: Selects the lambda_rn preset when cfg.lambda_rn is None

    Returns:
        FusionResult with the fused mesh and the 200-step trace
    """
    cfg = cfg.for_garment(garment_kind)
    timing = {}
    started = time.perf_counter()
    if rig is None:
        rig = build_camera_rig(template, resolution=pos_imgs["front"].resolution)

    rasters, renderers, tables = {}, {}, {}
    for view in VIEWS:
        if pos_imgs[view].kind != "position" or normal_imgs[view].kind != "normal":
            raise DataError(f"{view}: expected position and normal images")
        raster, _ = rasterize_template(template, rig, view)
        rasters[view] = raster
        renderers[view] = TorchRenderer(raster)
        tables[view] = vertex_visibility(template, raster, rig, view)
    visibility = {view: float(tables[view].visible.mean()) for view in VIEWS}
    visibility["either"] = float(np.mean(tables["front"].visible | tables["back"].visible))
    timing["setup"] = time.perf_counter() - started

    mark = time.perf_counter()
    state = init_positions(pos_imgs, tables, template, bounds)
    initial = template.with_vertices(state.vertices, name=f"{template.name}_init")
    timing["init"] = time.perf_counter() - mark

    mark = time.perf_counter()
    state, trace1 = stage1_optimize(state, template, cfg)
    stage1 = template.with_vertices(state.vertices, name=f"{template.name}_stage1")
    timing["stage1"] = time.perf_counter() - mark

    mark = time.perf_counter()
    collider = BodyCollider(body)
    vertices, trace2 = stage2_optimize(state, template, normal_imgs, renderers, collider, cfg,
                                       pos_imgs, bounds)
    timing["stage2"] = time.perf_counter() - mark
    timing["total"] = time.perf_counter() - started

    logger.info("fused %s: %d vertices, %d penetrating (stage 1: %d), %.1fs",
                template.name, template.num_vertices, penetrating_count(vertices, collider),
                penetrating_count(stage1.vertices, collider), timing["total"])
    return FusionResult(template.with_vertices(vertices, name=f"{template.name}_fused"),
                        initial, stage1, trace1 + trace2, timing, visibility, cfg)


def write_trace(path: str, result: FusionResult):
    """Store the loss trace, timing and configuration as JSON."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        json.dump({
            "schema_version": SCHEMA_VERSION,
            "config": result.config.to_dict(),
            "timing": result.timing,
            "visibility": result.visibility,
            "trace": result.trace,
        }, f, indent=2)
