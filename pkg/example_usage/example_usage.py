"""
Example usage of the skinfree package.

This script walks through the main stages on a miniature configuration:
- Synthetic dataset generation
- Attribute images and their visualization
- Training the position and normal transfer networks
- Transferring and fusing a test sample
- Evaluation against the template baseline
"""

import os
import sys
import tempfile

# Add the package to path for local development
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from skinfree import Config, TransferModel, evaluate_clip, fuse
from skinfree.data import generate_dataset, make_garment_template, transfer_pairs
from skinfree.mesh import edge_set
from skinfree.models import build_network, train
from skinfree.raster import build_camera_rig
from skinfree.visualization import AttributeVisualizer

KINDS = ("position", "normal")


def tiny_config(root: str) -> Config:
    """Defaults shrunk so every stage finishes in seconds."""
    config = Config()
    config.set("camera.resolution", 32)
    config.set("synth.body.ring_segments", 16)
    config.set("synth.body.rings_per_segment", 2)
    config.set("synth.garment.rings", 10)
    config.set("synth.garment.segments", 16)
    config.set("synth.n_train", 4)
    config.set("synth.n_test", 1)
    config.set("transfer_net", {"image_size": 32, "patch_size": 8, "dim": 32, "heads": 2,
                                "blocks": 1, "mlp_ratio": 2, "decoder_channels": [16, 8, 8],
                                "residual_blocks": 1, "residual_output": True})
    for modality in KINDS:
        config.set(f"training.{modality}.iterations", 20)
    config.set("fusion.stage1_steps", 20)
    config.set("fusion.stage2_steps", 20)
    for key in ("data_dir", "checkpoint_dir", "output_dir"):
        config.set(f"paths.{key}", os.path.join(root, key))
    return config.validate()


def example_dataset(config: Config):
    """Example: Generate a synthetic dataset."""
    print("=== Dataset Example ===")

    rig, spec, model = config.body_rig(), config.garment_spec(), config.deformation_model()
    template = make_garment_template(spec, rig, model.margin)
    cameras = build_camera_rig(template, resolution=config.get("camera.resolution"))
    manifest = generate_dataset(config.data_dir, config.get("synth.n_train"),
                                config.get("synth.n_test"), model, rig, spec,
                                rig_cameras=cameras, poses=config.poses(),
                                seed=config.get("synth.seed"))
    print(f"Template: {template.num_vertices} vertices, {template.num_faces} faces")
    print(f"Samples: {len(manifest.split('train'))} train, {len(manifest.split('test'))} test")
    print(f"Manifest sha256: {manifest.digest()}")
    return manifest, template


def example_visualization(manifest, out_dir: str):
    """Example: Show the template's attribute images."""
    print("\n=== Visualization Example ===")

    images = [image for kind in KINDS for image in manifest.template_images(kind).values()]
    fig = AttributeVisualizer.show_views(images)
    path = os.path.join(out_dir, "template_images.png")
    AttributeVisualizer.save_visualization(fig, path)
    print(f"Template images saved to: {path}")


def example_training(config: Config, manifest):
    """Example: Train one network per modality."""
    print("\n=== Training Example ===")

    nets, histories = {}, {}
    for modality in KINDS:
        train_cfg = config.training(modality)
        net = build_network(config.transfer_net(), train_cfg.seed)
        nets[modality], histories[modality] = train(
            net, transfer_pairs(manifest, modality, "train"), train_cfg,
            checkpoint_path=os.path.join(config.checkpoint_dir, f"{modality}.ckpt"))
        history = histories[modality]
        print(f"{modality}: loss {history[0]:.4f} -> {history[-1]:.4f}")
    return TransferModel(nets["position"], nets["normal"], device="cpu"), histories


def example_transfer_and_fusion(config: Config, manifest, template, model: TransferModel):
    """Example: Transfer the test sample's images and fuse them into a mesh."""
    print("\n=== Transfer and Fusion Example ===")

    record = manifest.split("test")[0]
    template_imgs = {kind: manifest.template_images(kind) for kind in KINDS}
    body_imgs = {kind: manifest.sample_images(record, "body", kind) for kind in KINDS}
    predicted = model.predict(template_imgs, body_imgs)

    body = manifest.load_body(record)
    result = fuse(predicted["position"], predicted["normal"], template, body,
                  manifest.bounds, config.fusion(), manifest.cameras,
                  garment_kind=config.get("synth.garment.kind"))
    print(f"Fusion loss: {result.trace[0]['total']:.4g} -> {result.trace[-1]['total']:.4g}")
    print(f"Timing: {result.timing['total']:.2f}s")
    return record, body, result


def example_evaluation(manifest, template, record, body, result):
    """Example: Compare the fused mesh and the template with the ground truth."""
    print("\n=== Evaluation Example ===")

    gt = manifest.load_garment(record)
    edges = edge_set(template)
    for name, mesh in (("fused", result.mesh), ("template", template)):
        aggregate = evaluate_clip([mesh], [gt], [body], edges, [record.name]).aggregate()
        print(f"{name:>8}: RMSE {aggregate['rmse']:.2f} mm, "
              f"Hausdorff {aggregate['hausdorff']:.2f} mm, "
              f"collision {100 * aggregate['collision']:.1f}%")


def main():
    """Run all examples."""
    print("skinfree Package Examples")
    print("=" * 40)

    with tempfile.TemporaryDirectory() as root:
        config = tiny_config(root)
        config.create_directories()
        print(f"Created directories in: {root}")

        manifest, template = example_dataset(config)
        example_visualization(manifest, config.output_dir)
        model, _ = example_training(config, manifest)
        record, body, result = example_transfer_and_fusion(config, manifest, template, model)
        example_evaluation(manifest, template, record, body, result)

    print("\n" + "=" * 40)
    print("Examples completed!")


if __name__ == "__main__":
    main()
