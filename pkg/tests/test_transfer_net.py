import dataclasses

import numpy as np
import pytest
import torch

from skinfree.data.dataset import TransferPair
from skinfree.errors import ConfigError, DataError
from skinfree.models import (
    RefineBlock,
    TrainingConfig,
    TransferModel,
    TransferNet,
    TransferNetConfig,
    build_network,
    forward_transfer,
    load_network,
    masked_l1,
    patch_encode,
    refine_block,
    train,
)
from skinfree.raster import AttributeImage


def _image(seed, size=32, view="front", kind="position", owner="garment", mask=None):
    rng = np.random.default_rng(seed)
    if mask is None:
        mask = np.zeros((size, size), dtype=bool)
        mask[4:28, 6:26] = True
    return AttributeImage(rng.uniform(0.1, 0.9, (size, size, 3)), mask, view, kind, owner)


def _pairs(count=2, kind="position"):
    pairs = []
    for i in range(count):
        view = ("front", "back")[i % 2]
        template = _image(10 + i, view=view, kind=kind)
        body = _image(20 + i, view=view, kind=kind, owner="body",
                      mask=np.ones((32, 32), dtype=bool))
        target = template.with_pixels(np.clip(template.pixels + 0.05, 0.0, 1.0))
        pairs.append(TransferPair(template, body, target, template.mask))
    return pairs


def test_config_validation():
    with pytest.raises(ValueError):
        TransferNetConfig(image_size=30, patch_size=8)
    with pytest.raises(ValueError):
        TransferNetConfig(image_size=32, patch_size=8, decoder_channels=(8, 8))
    with pytest.raises(ConfigError):
        TransferNetConfig.from_dict({"image_size": 32, "patch_size": 6})
    cfg = TransferNetConfig.from_dict({"image_size": 32, "patch_size": 8, "dim": 16, "heads": 2,
                                       "decoder_channels": [8, 8, 8]})
    assert cfg.num_tokens == 16
    assert TransferNetConfig.from_dict(cfg.to_dict()) == cfg


def test_patch_tokens_shape(tiny_net_cfg):
    net = TransferNet(tiny_net_cfg)
    tokens = patch_encode(net, _image(0))
    assert tokens.shape == (16, 16)
    with pytest.raises(DataError):
        patch_encode(net, _image(0, size=16, mask=np.ones((16, 16), dtype=bool)))


def test_untrained_network_reproduces_template(tiny_net_cfg):
    net = TransferNet(tiny_net_cfg)
    template = _image(1)
    out = forward_transfer(net, template, _image(2, owner="body"))
    np.testing.assert_array_equal(out.pixels, template.pixels.astype(np.float32))
    assert out.owner == "garment" and out.view == "front"


def test_forward_transfer_rejects_mismatched_inputs(tiny_net_cfg):
    net = TransferNet(tiny_net_cfg)
    with pytest.raises(DataError, match="view"):
        forward_transfer(net, _image(1), _image(2, view="back", owner="body"))
    with pytest.raises(DataError, match="kind"):
        forward_transfer(net, _image(1), _image(2, kind="normal", owner="body"))


def test_attention_rows_sum_to_one(tiny_net_cfg):
    block = RefineBlock(tiny_net_cfg)
    g, b = torch.randn(2, 16, 16), torch.randn(2, 16, 16)
    weights = block.attention_weights(g, b)
    assert weights.shape == (2, tiny_net_cfg.heads, 16, 16)
    torch.testing.assert_close(weights.sum(dim=-1), torch.ones(2, tiny_net_cfg.heads, 16))


def test_zeroed_refine_block_is_identity(tiny_net_cfg):
    block = RefineBlock(tiny_net_cfg)
    block.zero_init_outputs()
    g, b = torch.randn(16, 16), torch.randn(16, 16)
    out = refine_block(block, g, b)
    assert out.shape == (16, 16)
    torch.testing.assert_close(out, g)


def test_masked_l1():
    mask = np.zeros((32, 32), dtype=bool)
    mask[0, 0] = True
    a = AttributeImage(np.full((32, 32, 3), 0.5), mask, "front")
    b = a.with_pixels(np.full((32, 32, 3), 0.25))
    assert masked_l1(a, b) == pytest.approx(0.25)
    assert masked_l1(a, b, np.zeros((32, 32), dtype=bool)) == 0.0

    pred = torch.zeros(1, 3, 2, 2)
    target = torch.ones(1, 3, 2, 2)
    tensor_mask = torch.tensor([[[[1.0, 0.0], [0.0, 0.0]]]])
    assert masked_l1(pred, target, tensor_mask).item() == pytest.approx(1.0)
    assert masked_l1(pred, target, torch.zeros(1, 1, 2, 2)).item() == 0.0


def test_training_reduces_loss(tiny_net_cfg):
    net = build_network(tiny_net_cfg, seed=0)
    cfg = TrainingConfig(lr=1e-3, iterations=30, batch_size=2, seed=0, modality="position")
    _, history = train(net, _pairs(), cfg, progress=False)
    assert len(history) == 30
    assert history[-1] < history[0]


def test_zero_learning_rate_keeps_loss_flat(tiny_net_cfg):
    net = build_network(tiny_net_cfg, seed=0)
    cfg = TrainingConfig(lr=0.0, iterations=5, batch_size=4, seed=0, modality="position")
    _, history = train(net, _pairs(), cfg, progress=False)
    assert len(set(history)) == 1
    # An untrained network returns the template, 0.05 away from every target pixel.
    assert history[0] == pytest.approx(2 * 0.05, rel=1e-4)


def test_training_is_reproducible(tiny_net_cfg):
    cfg = TrainingConfig(lr=1e-3, iterations=6, batch_size=1, seed=4, modality="position")
    _, first = train(build_network(tiny_net_cfg, 0), _pairs(3), cfg, progress=False)
    _, second = train(build_network(tiny_net_cfg, 0), _pairs(3), cfg, progress=False)
    assert first == second


def test_modality_mismatch(tiny_net_cfg):
    cfg = TrainingConfig(iterations=1, modality="normal")
    with pytest.raises(DataError):
        train(build_network(tiny_net_cfg, 0), _pairs(), cfg, progress=False)


def test_resume_continues_the_same_curve(tiny_net_cfg, tmp_path):
    cfg = TrainingConfig(lr=1e-3, iterations=6, batch_size=1, seed=2, modality="position")
    pairs = _pairs(3)
    _, full = train(build_network(tiny_net_cfg, 0), pairs, cfg, progress=False)

    ckpt = str(tmp_path / "position.ckpt")
    half = dataclasses.replace(cfg, iterations=3)
    train(build_network(tiny_net_cfg, 0), pairs, half, checkpoint_path=ckpt, progress=False)
    _, resumed = train(build_network(tiny_net_cfg, 5), pairs, cfg, resume_from=ckpt,
                       progress=False)
    assert len(resumed) == 6
    np.testing.assert_allclose(resumed, full, rtol=1e-6)
    assert (tmp_path / "position.history.json").exists()


def test_checkpoint_restores_predictions(tiny_net_cfg, tmp_path):
    cfg = TrainingConfig(lr=1e-3, iterations=3, batch_size=2, seed=0, modality="normal")
    pairs = _pairs(kind="normal")
    net, _ = train(build_network(tiny_net_cfg, 0), pairs, cfg,
                   checkpoint_path=str(tmp_path / "n.ckpt"), progress=False)
    loaded, extra = load_network(str(tmp_path / "n.ckpt"))
    assert extra["modality"] == "normal" and extra["iteration"] == 3
    a = forward_transfer(net, pairs[0].template_img, pairs[0].body_img)
    b = forward_transfer(loaded, pairs[0].template_img, pairs[0].body_img)
    np.testing.assert_array_equal(a.pixels, b.pixels)


def test_transfer_model(tiny_net_cfg):
    position, normal = TransferNet(tiny_net_cfg), TransferNet(tiny_net_cfg)
    with pytest.raises(ValueError):
        TransferModel(position, position, device="cpu")
    model = TransferModel(position, normal, device="cpu")
    templates = {k: {v: _image(1, view=v, kind=k) for v in ("front", "back")}
                 for k in ("position", "normal")}
    bodies = {k: {v: _image(2, view=v, kind=k, owner="body") for v in ("front", "back")}
              for k in ("position", "normal")}
    out = model.predict(templates, bodies)
    assert set(out) == {"position", "normal"}
    assert out["normal"]["back"].kind == "normal"
    assert model.get_model_info()["image_size"] == 32
    assert set(model.predict(templates, bodies, modalities=("normal",))) == {"normal"}
