"""
Configuration module for skinfree.

This module provides the default settings of every pipeline stage and the
typed views the stages consume.
"""

import copy
import json
import os
from pathlib import Path
from typing import Any, Dict

from ..errors import ConfigError

SCHEMA_VERSION = 1


class Config:
    """Configuration class for skinfree pipelines."""

    RUNTIME_DEFAULTS = {
        "seed": 0,
        "threads": 1,
    }

    # Camera framing shared by garment and body renders
    CAMERA_DEFAULTS = {
        "resolution": 256,
        "distance_factor": 12.0,
        "margin": 0.05,
    }

    # Position encoding box; null corners are derived from the generated data
    BOUNDS_DEFAULTS = {
        "low": None,
        "high": None,
        "inflate": 0.1,
    }

    SYNTH_DEFAULTS = {
        "body": {
            "segment_lengths": [250.0, 250.0, 250.0],
            "radii": [100.0, 120.0, 110.0, 90.0],
            "ring_segments": 48,
            "rings_per_segment": 8,
            "cap_rings": 6,
        },
        "garment": {
            "topology": "tube",
            "kind": "dress",
            "rings": 32,
            "segments": 64,
            "radius": 170.0,
            "length": 560.0,
            "top": -20.0,
            "attachment_rings": 1,
        },
        "deformation": {
            "amplitude": 15.0,
            "waves": 6,
            "phase_coeff": 3.0,
            "margin": 5.0,
            "blend_width": 80.0,
            "fade_length": 100.0,
            "seed": 0,
        },
        "poses": {
            "max_angle": 0.5,
            "max_yaw": 0.3,
            "max_translation": 50.0,
        },
        "n_train": 40,
        "n_test": 10,
        "seed": 0,
    }

    TRANSFER_NET_DEFAULTS = {
        "image_size": 256,
        "patch_size": 16,
        "dim": 128,
        "heads": 4,
        "blocks": 4,
        "mlp_ratio": 4,
        "decoder_channels": [64, 32, 16, 8],
        "residual_blocks": 2,
        "residual_output": True,
    }

    TRAINING_DEFAULTS = {
        "position": {"lr": 1e-4, "iterations": 2000, "batch_size": 4, "seed": 0,
                     "modality": "position", "log_every": 50},
        "normal": {"lr": 1e-4, "iterations": 2000, "batch_size": 4, "seed": 1,
                   "modality": "normal", "log_every": 50},
    }

    FUSION_DEFAULTS = {
        "lambda_rv": 0.02,
        "lambda_e": 100.0,
        "lambda_c": 100.0,
        "lambda_rn": 0.01,
        "lambda_rp": 0.0,
        "lr": 1e-3,
        "stage1_steps": 100,
        "stage2_steps": 100,
        "seed": 0,
        "length_unit_mm": 1000.0,
        "divergence_factor": 10.0,
    }

    def __init__(self, config_file: str = None):
        """
        Initialize configuration.

        Args:
            config_file: Optional path to a JSON or YAML configuration file

        Raises:
            ConfigError: If the file is missing or unreadable
        """
        self._config = self._load_default_config()

        if config_file:
            if not os.path.exists(config_file):
                raise ConfigError(f"config file not found: {config_file}")
            self._load_config_file(config_file)

    def _load_default_config(self) -> Dict[str, Any]:
        """Load default configuration settings."""
        return copy.deepcopy({
            "schema_version": SCHEMA_VERSION,
            "runtime": self.RUNTIME_DEFAULTS,
            "camera": self.CAMERA_DEFAULTS,
            "bounds": self.BOUNDS_DEFAULTS,
            "synth": self.SYNTH_DEFAULTS,
            "transfer_net": self.TRANSFER_NET_DEFAULTS,
            "training": self.TRAINING_DEFAULTS,
            "fusion": self.FUSION_DEFAULTS,
            "paths": {
                "data_dir": "data",
                "checkpoint_dir": "checkpoints",
                "output_dir": "output",
            },
        })

    def _load_config_file(self, config_file: str):
        """
        Load configuration from file.

        Args:
            config_file: Path to configuration file (JSON or YAML)
        """
        try:
            with open(config_file, 'r') as f:
                if config_file.endswith('.yaml') or config_file.endswith('.yml'):
                    import yaml
                    file_config = yaml.safe_load(f)
                else:
                    file_config = json.load(f)
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read config {config_file}: {e}")

        if not isinstance(file_config, dict):
            raise ConfigError(f"config {config_file} must contain a mapping")
        self._deep_update(self._config, file_config)

    def _deep_update(self, base_dict: dict, update_dict: dict):
        """Merge a file's sections into the defaults; nested sections merge, leaves replace."""
        for key, value in update_dict.items():
            if isinstance(value, dict) and isinstance(base_dict.get(key), dict):
                self._deep_update(base_dict[key], value)
            else:
                base_dict[key] = value

    def get(self, key: str, default: Any = None) -> Any:
        """
        Look up a setting by its section path.

        Sections nest as stage, then group, then leaf: 'camera.resolution',
        'fusion.lambda_rn', 'synth.garment.kind' or 'training.normal.lr'.
        A path that stops inside a section returns the section mapping.

        Args:
            key: Dotted section path
            default: Returned when any part of the path is absent

        Returns:
            The leaf value or section mapping
        """
        node = self._config
        for part in key.split('.'):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set(self, key: str, value: Any):
        """
        Override one setting, e.g. set('bounds.low', [-300, -800, -300]).

        Missing sections along the path are created, so overrides such as
        'paths.output_dir' work on a bare default config.
        """
        *sections, leaf = key.split('.')
        node = self._config
        for part in sections:
            node = node.setdefault(part, {})
        node[leaf] = value

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self._config)

    def save_config(self, filepath: str):
        """
        Write the resolved settings, defaults included, next to a run's outputs.

        Keys are sorted so two runs with the same settings produce identical
        files; 'schema_version' records the layout they were written with.
        """
        Path(filepath).parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, 'w') as f:
            json.dump(self._config, f, indent=2, sort_keys=True)

    def create_directories(self):
        """Create necessary directories."""
        for dir_key in ['data_dir', 'checkpoint_dir', 'output_dir']:
            Path(self.get(f'paths.{dir_key}')).mkdir(parents=True, exist_ok=True)

    def validate(self) -> "Config":
        """
        Check every section by building its typed view.

        Raises:
            ConfigError: On missing or invalid values
        """
        for key in ("runtime.seed", "synth.seed", "synth.deformation.seed", "fusion.seed",
                    "training.position.seed", "training.normal.seed"):
            value = self.get(key)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"'{key}' must be an explicit integer seed, got {value!r}")
        threads = self.get("runtime.threads")
        if not isinstance(threads, int) or threads < 1:
            raise ConfigError(f"'runtime.threads' must be a positive integer, got {threads!r}")

        self.camera()
        self.transfer_net()
        self.training("position")
        self.training("normal")
        self.fusion()
        self.body_rig()
        self.garment_spec()
        self.deformation_model()
        self.poses()
        return self

    # Typed views. Imports are local so utils stays importable on its own.

    def camera(self):
        from ..raster.camera import CameraConfig
        return CameraConfig.from_dict(self.get("camera"))

    def transfer_net(self):
        from ..models.transfer_net import TransferNetConfig
        return TransferNetConfig.from_dict(self.get("transfer_net"))

    def training(self, modality: str):
        from ..models.training import TrainingConfig
        section = self.get(f"training.{modality}")
        if section is None:
            raise ConfigError(f"no training section for modality '{modality}'")
        return TrainingConfig.from_dict({**section, "modality": modality})

    def fusion(self):
        from ..fusion.optimizer import FusionConfig
        return FusionConfig.from_dict(self.get("fusion"))

    def body_rig(self):
        from ..data.synth import BodyRig
        return BodyRig.from_dict(self.get("synth.body"))

    def garment_spec(self):
        from ..data.synth import GarmentSpec
        return GarmentSpec.from_dict(self.get("synth.garment"))

    def deformation_model(self):
        from ..data.synth import DeformationModel
        return DeformationModel.from_dict(self.get("synth.deformation"))

    def poses(self):
        from ..data.dataset import PoseSampler
        return PoseSampler.from_dict(self.get("synth.poses"))

    @property
    def seed(self) -> int:
        return self.get('runtime.seed')

    @property
    def threads(self) -> int:
        return self.get('runtime.threads')

    @property
    def data_dir(self) -> str:
        """Get data directory path."""
        return self.get('paths.data_dir')

    @property
    def checkpoint_dir(self) -> str:
        """Get checkpoint directory path."""
        return self.get('paths.checkpoint_dir')

    @property
    def output_dir(self) -> str:
        """Get output directory path."""
        return self.get('paths.output_dir')


def dataclass_from_dict(cls, data: Dict[str, Any], section: str):
    """
    Build a config dataclass, rejecting unknown keys.

    Raises:
        ConfigError: On unknown keys or a failed constructor check
    """
    import dataclasses

    if data is None:
        raise ConfigError(f"missing config section '{section}'")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {unknown}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid '{section}' config: {e}")
