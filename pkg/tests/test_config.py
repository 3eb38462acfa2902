import json

import pytest
import yaml

from skinfree.errors import ConfigError
from skinfree.utils import Config


def _write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_defaults_validate():
    config = Config().validate()
    assert config.seed == 0
    assert config.threads == 1
    assert config.fusion().stage1_steps == 100
    assert config.training("normal").modality == "normal"
    assert config.transfer_net().decoder_channels == (64, 32, 16, 8)
    assert config.poses().max_angle == 0.5


def test_yaml_overrides_keep_other_defaults(tmp_path):
    path = _write_yaml(tmp_path / "run.yaml", {
        "fusion": {"lambda_e": 5.0},
        "synth": {"garment": {"kind": "tshirt"}, "poses": {"max_yaw": 0.0}},
    })
    config = Config(path).validate()
    assert config.fusion().lambda_e == 5.0
    assert config.fusion().lambda_c == 100.0
    assert config.garment_spec().kind == "tshirt"
    assert config.garment_spec().rings == 32
    assert config.poses().max_yaw == 0.0


def test_json_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"runtime": {"seed": 7}}))
    assert Config(str(path)).validate().seed == 7


def test_unknown_key_is_rejected(tmp_path):
    path = _write_yaml(tmp_path / "run.yaml", {"fusion": {"lambda_x": 1.0}})
    with pytest.raises(ConfigError, match="lambda_x"):
        Config(path).validate()


def test_invalid_value_is_a_config_error(tmp_path):
    path = _write_yaml(tmp_path / "run.yaml", {"fusion": {"stage1_steps": 0}})
    with pytest.raises(ConfigError):
        Config(path).validate()


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        Config(str(tmp_path / "absent.yaml"))
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError):
        Config(str(broken))
    listed = tmp_path / "listed.yaml"
    listed.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        Config(str(listed))


@pytest.mark.parametrize("key,value", [
    ("runtime.seed", 1.5),
    ("runtime.seed", True),
    ("synth.seed", None),
    ("fusion.seed", "0"),
    ("runtime.threads", 0),
])
def test_seeds_and_threads_must_be_integers(key, value):
    config = Config()
    config.set(key, value)
    with pytest.raises(ConfigError):
        config.validate()


def test_null_lambda_rn_uses_presets(tmp_path):
    path = _write_yaml(tmp_path / "run.yaml", {"fusion": {"lambda_rn": None}})
    fusion = Config(path).validate().fusion()
    assert fusion.lambda_rn is None
    assert fusion.for_garment("tshirt").lambda_rn == 0.001


def test_get_set_and_save(tmp_path):
    config = Config()
    for key in ("data_dir", "checkpoint_dir", "output_dir"):
        config.set(f"paths.{key}", str(tmp_path / key))
    config.set("extra.nested.value", 3)
    assert config.get("extra.nested.value") == 3
    assert config.get("fusion.nothing", "fallback") == "fallback"
    assert config.get("synth.garment")["kind"] == "dress"
    assert config.get("camera.resolution.width") is None
    config.set("synth.garment.kind", "tshirt")
    assert config.garment_spec().kind == "tshirt"

    path = tmp_path / "resolved" / "config.json"
    config.save_config(str(path))
    saved = json.loads(path.read_text())
    assert saved["paths"]["output_dir"] == str(tmp_path / "output_dir")
    assert saved["schema_version"] == 1

    config.create_directories()
    assert all((tmp_path / key).is_dir() for key in ("data_dir", "checkpoint_dir", "output_dir"))


def test_missing_training_section():
    with pytest.raises(ConfigError):
        Config().training("depth")


def test_camera_section(sheet):
    config = Config()
    config.set("camera.resolution", 48)
    rig = config.validate().camera().rig_for(sheet)
    assert rig.cameras["front"].resolution == 48

    config.set("camera.margin", 0.6)
    with pytest.raises(ConfigError):
        config.validate()
