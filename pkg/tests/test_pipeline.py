"""End-to-end run of the pipeline command on a miniature configuration."""

import json

import pytest
import yaml

from skinfree import cli


def _tiny_config(root):
    return {
        "runtime": {"seed": 0, "threads": 1},
        "camera": {"resolution": 32},
        "synth": {
            "body": {"segment_lengths": [100.0, 100.0, 100.0], "radii": [40.0, 48.0, 44.0, 36.0],
                     "ring_segments": 12, "rings_per_segment": 2, "cap_rings": 3},
            "garment": {"topology": "tube", "kind": "dress", "rings": 8, "segments": 12,
                        "radius": 75.0, "length": 220.0, "top": -10.0},
            "deformation": {"amplitude": 4.0, "waves": 3, "blend_width": 30.0,
                            "fade_length": 40.0},
            "poses": {"max_angle": 0.4, "max_yaw": 0.2, "max_translation": 20.0},
            "n_train": 2,
            "n_test": 2,
            "seed": 3,
        },
        "transfer_net": {"image_size": 32, "patch_size": 8, "dim": 16, "heads": 2, "blocks": 1,
                         "mlp_ratio": 2, "decoder_channels": [8, 8, 8], "residual_blocks": 1},
        "training": {
            "position": {"iterations": 3, "batch_size": 2, "log_every": 1},
            "normal": {"iterations": 3, "batch_size": 2, "log_every": 1},
        },
        "fusion": {"stage1_steps": 2, "stage2_steps": 2, "lr": 1e-4},
        "paths": {name: str(root / name) for name in ("data_dir", "checkpoint_dir", "output_dir")},
    }


@pytest.mark.slow
def test_pipeline_end_to_end(tmp_path):
    config_path = tmp_path / "tiny.yaml"
    config_path.write_text(yaml.safe_dump(_tiny_config(tmp_path)))

    assert cli.main(["--threads", "1", "pipeline", "--config", str(config_path)]) == cli.EXIT_OK

    out = tmp_path / "output_dir"
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["training"]) == {"position", "normal"}
    assert set(summary["evaluation"]) == {"fused", "template"}
    assert len(summary["dataset"]["manifest_sha256"]) == 64
    assert summary["timing"]["total"] > 0

    report = json.loads((out / "report.json").read_text())
    frames = report["methods"]["fused"]["frames"]
    assert [f["name"] for f in frames] == sorted(f["name"] for f in frames)
    assert len(frames) == 2

    for name in ("metrics.png", "fusion_trace.png", "training_loss.png"):
        assert (out / "figures" / name).stat().st_size > 0
    assert (tmp_path / "checkpoint_dir" / "position.ckpt").exists()
    assert (tmp_path / "checkpoint_dir" / "normal.ckpt").exists()
    assert len(list((out / "traces").glob("*.json"))) == 2
    assert (out / cli.RESOLVED_CONFIG).exists()
