"""
Synthetic dataset generation and loading.

A dataset directory holds the garment template with its images, one
directory per sample with world-space meshes and the eight rendered images,
and a manifest.json that lists every file with its SHA-256 digest.
"""

import dataclasses
import hashlib
import json
import logging
import os
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from ..errors import DataError, GeometryError
from ..geometry.sdf import BodyCollider
from ..mesh.obj_io import load_obj, save_obj
from ..mesh.trimesh import RootTransform, TriMesh, apply_root_normalization, vertex_normals
from ..raster.camera import VIEWS, CameraRig, build_camera_rig
from ..raster.encoding import AttributeImage, PositionBounds, encode_mesh_images
from ..raster.rasterizer import rasterize_mesh, rasterize_template
from ..utils.config import dataclass_from_dict
from ..utils.image_io import ImageIO
from .synth import (
    BodyRig,
    DeformationModel,
    GarmentSpec,
    gt_deform,
    make_body,
    make_garment_template,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"
MAX_POSE_ATTEMPTS = 100


@dataclasses.dataclass(frozen=True)
class PoseSampler:
    """
    Uniform pose and root-transform ranges.

    Attributes:
        max_angle: Bend angles are drawn from [-max_angle, max_angle] rad
        max_yaw: Root yaw about +y drawn from [-max_yaw, max_yaw] rad
        max_translation: Root translation components in [-t, t] mm
    """
    max_angle: float = 0.5
    max_yaw: float = 0.3
    max_translation: float = 50.0

    def __post_init__(self):
        if not 0 <= self.max_angle <= np.pi / 2:
            raise ValueError("max_angle must lie in [0, pi/2]")
        if self.max_yaw < 0 or self.max_translation < 0:
            raise ValueError("pose ranges must be non-negative")

    def sample(self, rng: np.random.Generator, pose_size: int) -> Tuple[np.ndarray, RootTransform]:
        theta = rng.uniform(-self.max_angle, self.max_angle, pose_size)
        yaw = rng.uniform(-self.max_yaw, self.max_yaw)
        translation = rng.uniform(-self.max_translation, self.max_translation, 3)
        return theta, RootTransform.from_yaw(yaw, translation)

    @classmethod
    def from_dict(cls, data: dict) -> "PoseSampler":
        return dataclass_from_dict(cls, data, "synth.poses")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class SampleRecord:
    """
    One generated training or test sample.

    Attributes:
        name: Sample directory name
        split: "train" or "test"
        pose: Bend angles
        root: World transform of the body root
        garment_path: World-space ground-truth garment OBJ
        body_path: World-space body OBJ
        images: Image key (e.g. "body_normal_back") -> PFM path
        silhouettes: "body_front"/"body_back" -> PGM path
    """
    name: str
    split: str
    pose: Tuple[float, ...]
    root: RootTransform
    garment_path: str
    body_path: str
    images: Dict[str, str]
    silhouettes: Dict[str, str]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "split": self.split,
            "pose": list(self.pose),
            "root": self.root.to_dict(),
            "garment": self.garment_path,
            "body": self.body_path,
            "images": dict(self.images),
            "silhouettes": dict(self.silhouettes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SampleRecord":
        return cls(data["name"], data["split"], tuple(data["pose"]),
                   RootTransform.from_dict(data["root"]), data["garment"], data["body"],
                   dict(data["images"]), dict(data["silhouettes"]))


@dataclasses.dataclass(frozen=True)
class TransferPair:
    """Training tuple of one sample in one view."""
    template_img: AttributeImage
    body_img: AttributeImage
    target_img: AttributeImage
    mask: np.ndarray


def image_key(owner: str, kind: str, view: str) -> str:
    return f"{owner}_{kind}_{view}"


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _sample_poses(n: int, sampler: PoseSampler, rig: BodyRig, seed: int):
    """Per-sample seeds come from (seed, index), so each draw is schedule independent."""
    poses, seen = [], set()
    for index in range(n):
        for attempt in range(MAX_POSE_ATTEMPTS):
            rng = np.random.default_rng(np.random.SeedSequence([seed, index, attempt]))
            theta, root = sampler.sample(rng, rig.pose_size)
            key = tuple(np.round(theta, 6))
            if key in seen:
                continue
            try:
                body = make_body(rig, theta)
            except GeometryError as e:
                logger.debug("sample %d attempt %d rejected: %s", index, attempt, e)
                continue
            seen.add(key)
            poses.append((theta, root, body))
            break
        else:
            raise DataError(f"could not draw a valid pose for sample {index}")
    return poses


def generate_dataset(out_dir: str,
                     n_train: int,
                     n_test: int,
                     model: DeformationModel,
                     rig: BodyRig,
                     spec: GarmentSpec,
                     rig_cameras: Optional[CameraRig] = None,
                     bounds: Optional[PositionBounds] = None,
                     poses: PoseSampler = PoseSampler(),
                     seed: int = 0,
                     inflate: float = 0.1,
                     progress: bool = True) -> "DatasetManifest":
    """
    Generate, render and write a synthetic dataset.

    Args:
        out_dir: Output directory
        n_train: Number of training samples
        n_test: Number of test samples
        model: Deformation parameters
        rig: Body rig
        spec: Garment template parameters
        rig_cameras: Camera rig; derived from the template when omitted
        bounds: Position bounds; derived from all generated meshes when omitted
        poses: Pose and root-transform ranges
        seed: Master seed
        inflate: Padding fraction used when deriving bounds
        progress: Show a progress bar

    Returns:
        The written manifest

    Raises:
        DataError: On out-of-bounds deformations or a penetrating ground truth
    """
    if n_train < 1 or n_test < 0:
        raise DataError(f"invalid split sizes: train={n_train}, test={n_test}")
    os.makedirs(out_dir, exist_ok=True)
    template = make_garment_template(spec, rig, model.margin)
    quiet = not progress or not logger.isEnabledFor(logging.INFO)
    cameras = rig_cameras or build_camera_rig(template)

    drawn = _sample_poses(n_train + n_test, poses, rig, seed)
    samples = []
    for index, (theta, root, body) in enumerate(
            tqdm(drawn, desc="deform", disable=quiet)):
        garment = gt_deform(template, model, rig, theta, body=body,
                            attachment=spec.attachment_indices())
        clearance = BodyCollider(body).query(garment.vertices).distance.min()
        if clearance < model.margin - 1e-3:
            raise DataError(f"sample {index}: garment is {clearance:.4f} mm from the body, "
                            f"margin is {model.margin} mm")
        samples.append((theta, root, body, garment))

    if bounds is None:
        points = np.concatenate([template.vertices]
                                + [np.concatenate([b.vertices, g.vertices])
                                   for _, _, b, g in samples])
        bounds = PositionBounds.from_points(points, inflate)

    files: List[str] = []

    def write_image(rel: str, image: AttributeImage):
        ImageIO.save_attribute_image(os.path.join(out_dir, rel), image)
        files.append(rel)

    def write_silhouette(rel: str, silhouette):
        ImageIO.write_silhouette(os.path.join(out_dir, rel), silhouette)
        files.append(rel)

    template_entry = {"garment": "template/garment.obj", "images": {}, "silhouettes": {}}
    save_obj(template, os.path.join(out_dir, template_entry["garment"]))
    files.append(template_entry["garment"])
    rasters = {}
    for view in VIEWS:
        raster, silhouette = rasterize_template(template, cameras, view)
        rasters[view] = raster
        images = encode_mesh_images(raster, template.vertices, vertex_normals(template), bounds)
        for kind, image in images.items():
            rel = f"template/{image_key('garment', kind, view)}.pfm"
            write_image(rel, image)
            template_entry["images"][image_key("garment", kind, view)] = rel
        rel = f"template/silhouette_{view}.pgm"
        write_silhouette(rel, silhouette)
        template_entry["silhouettes"][view] = rel

    records = []
    for index, (theta, root, body, garment) in enumerate(
            tqdm(samples, desc="render", disable=quiet)):
        split = "train" if index < n_train else "test"
        name = f"{split}_{index if split == 'train' else index - n_train:03d}"
        base = f"samples/{name}"
        garment_rel, body_rel = f"{base}/garment.obj", f"{base}/body.obj"
        world_garment = garment.with_vertices(root.apply(garment.vertices), name=name)
        world_body = body.with_vertices(root.apply(body.vertices), name=f"{name}_body")
        save_obj(world_garment, os.path.join(out_dir, garment_rel))
        save_obj(world_body, os.path.join(out_dir, body_rel))
        files.extend([garment_rel, body_rel])

        garment_c = apply_root_normalization(world_garment, root)
        body_c = apply_root_normalization(world_body, root)
        image_paths, silhouette_paths = {}, {}
        for view in VIEWS:
            owned = {
                "garment": encode_mesh_images(rasters[view], garment_c.vertices,
                                              vertex_normals(garment_c), bounds, "garment"),
            }
            body_raster, body_silhouette = rasterize_mesh(body_c, cameras, view)
            owned["body"] = encode_mesh_images(body_raster, body_c.vertices,
                                               vertex_normals(body_c), bounds, "body")
            for owner, images in owned.items():
                for kind, image in images.items():
                    key = image_key(owner, kind, view)
                    write_image(f"{base}/{key}.pfm", image)
                    image_paths[key] = f"{base}/{key}.pfm"
            rel = f"{base}/body_silhouette_{view}.pgm"
            write_silhouette(rel, body_silhouette)
            silhouette_paths[f"body_{view}"] = rel

        records.append(SampleRecord(name, split, tuple(float(t) for t in theta), root,
                                    garment_rel, body_rel, image_paths, silhouette_paths))

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "rig": rig.to_dict(),
        "garment": spec.to_dict(),
        "deformation": model.to_dict(),
        "poses": poses.to_dict(),
        "bounds": bounds.to_dict(),
        "cameras": cameras.to_dict(),
        "template": template_entry,
        "samples": [r.to_dict() for r in records],
        "files": {rel: _sha256(os.path.join(out_dir, rel)) for rel in sorted(files)},
    }
    path = os.path.join(out_dir, MANIFEST_NAME)
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    logger.info("wrote %d train / %d test samples to %s", n_train, n_test, out_dir)
    return DatasetManifest(out_dir, manifest)


class DatasetManifest:
    """Read access to a generated dataset."""

    def __init__(self, root: str, data: dict):
        if data.get("schema_version") != SCHEMA_VERSION:
            raise DataError(f"unsupported manifest schema {data.get('schema_version')}")
        self.root = root
        self.data = data
        self.records = [SampleRecord.from_dict(s) for s in data["samples"]]
        self.bounds = PositionBounds.from_dict(data["bounds"])
        self.cameras = CameraRig.from_dict(data["cameras"])
        self.rig = BodyRig.from_dict(data["rig"])
        self.spec = GarmentSpec.from_dict(data["garment"])

    def path(self, rel: str) -> str:
        return os.path.join(self.root, rel)

    def split(self, name: str) -> List[SampleRecord]:
        return [r for r in self.records if r.split == name]

    def template(self) -> TriMesh:
        return load_obj(self.path(self.data["template"]["garment"]))

    def template_silhouette(self, view: str):
        return ImageIO.read_silhouette(self.path(self.data["template"]["silhouettes"][view]), view)

    def template_images(self, kind: str) -> Dict[str, AttributeImage]:
        entry = self.data["template"]["images"]
        return {
            view: ImageIO.load_attribute_image(
                self.path(entry[image_key("garment", kind, view)]),
                self.template_silhouette(view), view, kind, "garment")
            for view in VIEWS
        }

    def sample_images(self, record: SampleRecord, owner: str, kind: str) -> Dict[str, AttributeImage]:
        """Front and back images of one sample; garment images use the template silhouette."""
        images = {}
        for view in VIEWS:
            if owner == "garment":
                mask = self.template_silhouette(view)
            else:
                mask = ImageIO.read_silhouette(self.path(record.silhouettes[f"body_{view}"]), view)
            images[view] = ImageIO.load_attribute_image(
                self.path(record.images[image_key(owner, kind, view)]), mask, view, kind, owner)
        return images

    def load_garment(self, record: SampleRecord, normalized: bool = True) -> TriMesh:
        mesh = load_obj(self.path(record.garment_path))
        return apply_root_normalization(mesh, record.root) if normalized else mesh

    def load_body(self, record: SampleRecord, normalized: bool = True) -> TriMesh:
        mesh = load_obj(self.path(record.body_path))
        return apply_root_normalization(mesh, record.root) if normalized else mesh

    def verify(self):
        """
        Check every listed file against its digest.

        Raises:
            DataError: On a missing or modified file
        """
        for rel, digest in self.data["files"].items():
            path = self.path(rel)
            if not os.path.exists(path):
                raise DataError(f"dataset file missing: {path}")
            if _sha256(path) != digest:
                raise DataError(f"dataset file changed since generation: {path}")

    def digest(self) -> str:
        return _sha256(self.path(MANIFEST_NAME))


def load_manifest(path: str) -> DatasetManifest:
    """
    Load a dataset manifest.

    Args:
        path: Dataset directory or manifest.json path

    Raises:
        FileNotFoundError: If the manifest is missing
    """
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_NAME)
    if not os.path.exists(path):
        raise FileNotFoundError(f"manifest not found: {path}")
    with open(path, "r") as f:
        data = json.load(f)
    return DatasetManifest(os.path.dirname(path) or ".", data)


def transfer_pairs(manifest: DatasetManifest,
                   modality: str,
                   split: str = "train",
                   limit: Optional[int] = None) -> List[TransferPair]:
    """
    Build (template, body, target, mask) tuples, one per sample and view.

    Args:
        manifest: Loaded dataset
        modality: "position" or "normal"
        split: Which samples to use
        limit: Keep only the first `limit` samples

    Returns:
        Pairs ordered by sample then view
    """
    templates = manifest.template_images(modality)
    records = manifest.split(split)[:limit]
    if not records:
        raise DataError(f"dataset has no '{split}' samples")
    pairs = []
    for record in records:
        bodies = manifest.sample_images(record, "body", modality)
        targets = manifest.sample_images(record, "garment", modality)
        for view in VIEWS:
            pairs.append(TransferPair(templates[view], bodies[view], targets[view],
                                      templates[view].mask))
    return pairs
