"""
Command-line interface: dataset generation, rendering, training, transfer,
fusion, evaluation and the end-to-end pipeline.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical divergence.
"""

import argparse
import json
import logging
import os
import sys
import time
from typing import Dict, List, Optional

import numpy as np

from .autodiff.engine import set_determinism
from .data.dataset import (
    generate_dataset,
    image_key,
    load_manifest,
    transfer_pairs,
)
from .data.synth import make_garment_template
from .errors import ConfigError, DataError, FusionDivergenceError, SkinfreeError
from .fusion.optimizer import fuse, write_trace
from .mesh.obj_io import load_obj, save_obj
from .mesh.trimesh import TriMesh, edge_set, vertex_normals
from .metrics.evaluation import evaluate_clip, write_report
from .models.training import build_network, train
from .models.transfer_model import TransferModel
from .raster.camera import MIN_RESOLUTION, VIEWS, CameraConfig, CameraRig, check_view
from .raster.encoding import (
    KINDS,
    AttributeImage,
    PositionBounds,
    render_attribute,
    rgb_encode_normals,
    rgb_encode_positions,
)
from .raster.rasterizer import Silhouette, rasterize_template
from .utils.config import Config
from .utils.image_io import ImageIO
from .visualization.plots import AttributeVisualizer

logger = logging.getLogger("skinfree")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4
RESOLVED_CONFIG = "config.resolved.json"


def load_config(path: Optional[str]) -> Config:
    """Load and validate a config file (defaults only when path is None)."""
    return Config(path).validate()


def camera_rig_for(template: TriMesh, config: Config) -> CameraRig:
    return config.camera().rig_for(template)


def configured_bounds(config: Config) -> Optional[PositionBounds]:
    low, high = config.get("bounds.low"), config.get("bounds.high")
    if low is None and high is None:
        return None
    if low is None or high is None:
        raise ConfigError("bounds.low and bounds.high must be set together")
    try:
        return PositionBounds(np.asarray(low, dtype=np.float64), np.asarray(high, dtype=np.float64))
    except ValueError as e:
        raise ConfigError(f"invalid bounds: {e}")


def read_bounds(path: str) -> PositionBounds:
    with open(path, "r") as f:
        data = json.load(f)
    try:
        return PositionBounds.from_dict(data.get("bounds", data))
    except (KeyError, ValueError) as e:
        raise ConfigError(f"{path}: invalid bounds: {e}")


def write_json(path: str, data: dict):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)


def load_garment_images(directory: str, kind: str,
                        masks: Dict[str, np.ndarray]) -> Dict[str, AttributeImage]:
    return {
        view: ImageIO.load_attribute_image(
            os.path.join(directory, f"{image_key('garment', kind, view)}.pfm"),
            masks[view], view, kind, "garment")
        for view in VIEWS
    }


def load_body_images(directory: str, kind: str) -> Dict[str, AttributeImage]:
    images = {}
    for view in VIEWS:
        mask = ImageIO.read_silhouette(os.path.join(directory, f"body_silhouette_{view}.pgm"), view)
        images[view] = ImageIO.load_attribute_image(
            os.path.join(directory, f"{image_key('body', kind, view)}.pfm"), mask, view, kind, "body")
    return images


def write_garment_images(directory: str, images: Dict[str, Dict[str, AttributeImage]]):
    for kind, views in images.items():
        for view, image in views.items():
            ImageIO.save_attribute_image(
                os.path.join(directory, f"{image_key('garment', kind, view)}.pfm"), image)
    for view, image in next(iter(images.values())).items():
        silhouette_path = os.path.join(directory, f"silhouette_{view}.pgm")
        ImageIO.write_silhouette(silhouette_path, Silhouette(image.mask, view))


# Commands


def cmd_synth_gen(args) -> int:
    config = load_config(args.config)
    set_determinism(config.seed, args.threads or config.threads)
    rig, spec, model = config.body_rig(), config.garment_spec(), config.deformation_model()
    template = make_garment_template(spec, rig, model.margin)
    manifest = generate_dataset(
        args.out, config.get("synth.n_train"), config.get("synth.n_test"), model, rig, spec,
        rig_cameras=camera_rig_for(template, config),
        bounds=configured_bounds(config),
        poses=config.poses(),
        seed=config.get("synth.seed"),
        inflate=config.get("bounds.inflate"),
    )
    config.save_config(os.path.join(args.out, RESOLVED_CONFIG))
    logger.info("manifest %s sha256 %s", os.path.join(args.out, "manifest.json"), manifest.digest())
    return EXIT_OK


def cmd_render(args) -> int:
    view = check_view(args.view)
    template = load_obj(args.template)
    deformed = load_obj(args.deformed)
    if deformed.num_vertices != template.num_vertices:
        raise DataError(f"{args.deformed} has {deformed.num_vertices} vertices, template has "
                        f"{template.num_vertices}")
    rig = CameraConfig(resolution=args.resolution).rig_for(template)
    raster, silhouette = rasterize_template(template, rig, view)
    if args.attr == "position":
        if args.bounds:
            bounds = read_bounds(args.bounds)
        else:
            bounds = PositionBounds.from_points(
                np.concatenate([template.vertices, deformed.vertices]))
            write_json(os.path.splitext(args.out)[0] + ".bounds.json",
                       {"schema_version": 1, "bounds": bounds.to_dict()})
        attrs = rgb_encode_positions(deformed.vertices, bounds)
    else:
        attrs = rgb_encode_normals(vertex_normals(deformed))
    image = render_attribute(raster, attrs, args.attr, "garment")
    ImageIO.save_attribute_image(args.out, image)
    ImageIO.write_silhouette(os.path.splitext(args.out)[0] + ".pgm", silhouette)
    logger.info("rendered %s %s image to %s", view, args.attr, args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_config(args.config)
    set_determinism(config.seed, args.threads or config.threads)
    manifest = load_manifest(args.data)
    net_cfg = config.transfer_net()
    if manifest.cameras.resolution != net_cfg.image_size:
        raise ConfigError(f"dataset images are {manifest.cameras.resolution}px, network expects "
                          f"{net_cfg.image_size}px")
    train_cfg = config.training(args.modality)
    pairs = transfer_pairs(manifest, args.modality, "train", args.limit)
    net = build_network(net_cfg, train_cfg.seed)
    _, history = train(net, pairs, train_cfg, resume_from=args.resume, checkpoint_path=args.ckpt_out)
    config.save_config(os.path.splitext(args.ckpt_out)[0] + "." + RESOLVED_CONFIG)
    logger.info("%s network: final loss %.6f (%.2f%% of initial)", args.modality, history[-1],
                100.0 * history[-1] / max(history[0], 1e-12))
    return EXIT_OK


def cmd_transfer(args) -> int:
    model = TransferModel.from_checkpoints(args.ckpt_pos, args.ckpt_norm, device="cpu")
    masks = {view: ImageIO.read_silhouette(
        os.path.join(args.template_imgs, f"silhouette_{view}.pgm"), view).mask for view in VIEWS}
    template_imgs = {kind: load_garment_images(args.template_imgs, kind, masks) for kind in KINDS}
    body_imgs = {kind: load_body_images(args.body_imgs, kind) for kind in KINDS}
    predicted = model.predict(template_imgs, body_imgs)
    write_garment_images(args.out, predicted)
    logger.info("wrote predicted images to %s", args.out)
    return EXIT_OK


def _fusion_inputs(args, config: Config, template: TriMesh):
    if args.manifest:
        manifest = load_manifest(args.manifest)
        return manifest.cameras, manifest.bounds
    rig = camera_rig_for(template, config)
    bounds = read_bounds(args.bounds) if args.bounds else configured_bounds(config)
    if bounds is None:
        raise ConfigError("fuse needs position bounds: pass --manifest, --bounds or set bounds "
                          "in the config")
    return rig, bounds


def cmd_fuse(args) -> int:
    config = load_config(args.config)
    set_determinism(config.seed, args.threads or config.threads)
    template = load_obj(args.template)
    body = load_obj(args.body)
    rig, bounds = _fusion_inputs(args, config, template)
    masks = {view: rasterize_template(template, rig, view)[1].mask for view in VIEWS}
    pos_imgs = load_garment_images(args.pos_imgs, "position", masks)
    normal_imgs = load_garment_images(args.norm_imgs, "normal", masks)
    result = fuse(pos_imgs, normal_imgs, template, body, bounds, config.fusion(), rig,
                  garment_kind=config.get("synth.garment.kind"))
    save_obj(result.mesh, args.out)
    stem = os.path.splitext(args.out)[0]
    write_trace(stem + ".trace.json", result)
    config.save_config(stem + "." + RESOLVED_CONFIG)
    return EXIT_OK


def _obj_names(directory: str) -> List[str]:
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"directory not found: {directory}")
    return sorted(os.path.splitext(f)[0] for f in os.listdir(directory) if f.endswith(".obj"))


def cmd_eval(args) -> int:
    names = _obj_names(args.pred_dir)
    if not names:
        raise DataError(f"no OBJ files in {args.pred_dir}")
    preds, gts, bodies = ([load_obj(os.path.join(directory, f"{name}.obj")) for name in names]
                          for directory in (args.pred_dir, args.gt_dir, args.body_dir))
    edges = edge_set(gts[0])
    evaluations = {"prediction": evaluate_clip(preds, gts, bodies, edges, names)}
    if args.baseline:
        template = load_obj(args.baseline)
        evaluations["template"] = evaluate_clip([template] * len(gts), gts, bodies, edges, names)
    write_report(args.report, evaluations)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    config = load_config(args.config)
    set_determinism(config.seed, args.threads or config.threads)
    started = time.perf_counter()
    out = config.output_dir
    config.create_directories()
    config.save_config(os.path.join(out, RESOLVED_CONFIG))
    timing = {}

    # 1. dataset
    mark = time.perf_counter()
    data_dir = config.data_dir
    rig, spec, model = config.body_rig(), config.garment_spec(), config.deformation_model()
    template = make_garment_template(spec, rig, model.margin)
    manifest = generate_dataset(
        data_dir, config.get("synth.n_train"), config.get("synth.n_test"), model, rig, spec,
        rig_cameras=camera_rig_for(template, config), bounds=configured_bounds(config),
        poses=config.poses(), seed=config.get("synth.seed"),
        inflate=config.get("bounds.inflate"))
    timing["synth"] = time.perf_counter() - mark

    # 2. one network per modality
    nets, histories = {}, {}
    for modality in KINDS:
        mark = time.perf_counter()
        train_cfg = config.training(modality)
        net = build_network(config.transfer_net(), train_cfg.seed)
        ckpt = os.path.join(config.checkpoint_dir, f"{modality}.ckpt")
        nets[modality], histories[modality] = train(
            net, transfer_pairs(manifest, modality, "train"), train_cfg, checkpoint_path=ckpt)
        timing[f"train_{modality}"] = time.perf_counter() - mark
    transfer = TransferModel(nets["position"], nets["normal"], device="cpu")

    # 3. transfer and fuse every test sample
    mark = time.perf_counter()
    fused_dir, gt_dir, body_dir = (os.path.join(out, "eval", d) for d in ("fused", "gt", "body"))
    template_imgs = {kind: manifest.template_images(kind) for kind in KINDS}
    fusion_cfg = config.fusion()
    preds, gts, bodies, names, first_trace = [], [], [], [], None
    for record in manifest.split("test"):
        body_imgs = {kind: manifest.sample_images(record, "body", kind) for kind in KINDS}
        predicted = transfer.predict(template_imgs, body_imgs)
        write_garment_images(os.path.join(out, "transfer", record.name), predicted)
        body = manifest.load_body(record)
        result = fuse(predicted["position"], predicted["normal"], template, body,
                      manifest.bounds, fusion_cfg, manifest.cameras, garment_kind=spec.kind)
        gt = manifest.load_garment(record)
        save_obj(result.mesh, os.path.join(fused_dir, f"{record.name}.obj"))
        save_obj(gt, os.path.join(gt_dir, f"{record.name}.obj"))
        save_obj(body, os.path.join(body_dir, f"{record.name}.obj"))
        write_trace(os.path.join(out, "traces", f"{record.name}.json"), result)
        preds.append(result.mesh)
        gts.append(gt)
        bodies.append(body)
        names.append(record.name)
        first_trace = first_trace or result.trace
    timing["transfer_fuse"] = time.perf_counter() - mark

    # 4. evaluation against the undeformed template baseline
    evaluations = {}
    if names:
        edges = edge_set(template)
        evaluations["fused"] = evaluate_clip(preds, gts, bodies, edges, names)
        evaluations["template"] = evaluate_clip([template] * len(gts), gts, bodies, edges, names)
        write_report(os.path.join(out, "report.json"), evaluations)
        with open(os.path.join(out, "report.json")) as f:
            AttributeVisualizer.save_visualization(
                AttributeVisualizer.plot_metrics(json.load(f)),
                os.path.join(out, "figures", "metrics.png"))
        AttributeVisualizer.save_visualization(
            AttributeVisualizer.plot_fusion_trace(first_trace),
            os.path.join(out, "figures", "fusion_trace.png"))
    AttributeVisualizer.save_visualization(
        AttributeVisualizer.plot_loss_history(histories),
        os.path.join(out, "figures", "training_loss.png"))

    timing["total"] = time.perf_counter() - started
    write_json(os.path.join(out, "summary.json"), {
        "schema_version": 1,
        "dataset": {"path": data_dir, "manifest_sha256": manifest.digest()},
        "training": {m: {"initial": h[0], "final": h[-1]} for m, h in histories.items()},
        "evaluation": {name: ev.aggregate() for name, ev in evaluations.items()},
        "timing": timing,
    })
    logger.info("pipeline finished in %.1fs", timing["total"])
    return EXIT_OK


def at_least(minimum: int):
    """argparse type for integers no smaller than `minimum`."""
    def parse(text: str) -> int:
        value = int(text)
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be at least {minimum}, got {value}")
        return value
    parse.__name__ = "int"
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skinfree", description="Skinning-free garment deformation pipeline")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--threads", type=at_least(1),
                        help="torch threads (default: runtime.threads from the config)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-gen", help="generate a synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("render", help="render one attribute image of a deformed template")
    p.add_argument("--template", required=True)
    p.add_argument("--deformed", required=True)
    p.add_argument("--view", required=True)
    p.add_argument("--attr", choices=KINDS, required=True)
    p.add_argument("--bounds", help="JSON file with low/high; derived when omitted")
    p.add_argument("--resolution", type=at_least(MIN_RESOLUTION), default=256)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("train", help="train one transfer network")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--modality", choices=KINDS, required=True)
    p.add_argument("--ckpt-out", required=True)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--limit", type=int, help="use only the first N training samples")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("transfer", help="predict posed garment images")
    p.add_argument("--ckpt-pos", required=True)
    p.add_argument("--ckpt-norm", required=True)
    p.add_argument("--template-imgs", required=True)
    p.add_argument("--body-imgs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("fuse", help="fuse position and normal images into a mesh")
    p.add_argument("--pos-imgs", required=True)
    p.add_argument("--norm-imgs", required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--body", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output OBJ; the trace is written next to it")
    p.add_argument("--manifest", help="dataset providing cameras and bounds")
    p.add_argument("--bounds", help="JSON file with low/high")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="evaluate predicted meshes")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--body-dir", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--baseline", help="template OBJ evaluated as a no-deformation baseline")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="synth-gen, train x2, transfer, fuse and eval")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except FusionDivergenceError as e:
        logger.error("%s", e)
        return EXIT_DIVERGENCE
    except (SkinfreeError, OSError) as e:
        logger.error("%s", e)
        return EXIT_DATA
    except ValueError as e:
        logger.error("invalid setting: %s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
