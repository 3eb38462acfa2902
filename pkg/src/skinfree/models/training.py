"""
Training loop for the transfer networks.

The loss of a minibatch is the masked L1 of each view, summed over views.
Checkpoints hold the parameters, the Adam moments and step, the loss
history and the shuffling state, so a resumed run continues the same curve.
"""

import dataclasses
import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from tqdm import tqdm

from ..autodiff.checkpoint import load_checkpoint, save_checkpoint
from ..autodiff.engine import AdamState, Tape, adam_step
from ..errors import DataError
from ..raster.camera import VIEWS
from ..raster.encoding import KINDS
from ..utils.config import dataclass_from_dict
from .transfer_net import TransferNet, TransferNetConfig, image_to_tensor, mask_to_tensor, masked_l1

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class TrainingConfig:
    """
    Optimization settings of one network.

    Attributes:
        lr: Adam learning rate
        iterations: Total iterations, counting those done before a resume
        batch_size: Pairs per minibatch, capped at the dataset size
        seed: Seeds parameter initialization and minibatch shuffling
        modality: "position" or "normal"
        log_every: Debug-log period in iterations
    """
    lr: float = 1e-4
    iterations: int = 2000
    batch_size: int = 4
    seed: int = 0
    modality: str = "position"
    log_every: int = 50

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.lr < 0:
            raise ValueError("learning rate must be non-negative")
        if self.modality not in KINDS:
            raise ValueError(f"unknown modality '{self.modality}'")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainingConfig":
        return dataclass_from_dict(cls, data, "training")

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class TrainingState:
    """Progress that a checkpoint must carry besides the parameters."""
    iteration: int = 0
    history: List[float] = dataclasses.field(default_factory=list)
    rng_state: Optional[dict] = None
    queue: List[int] = dataclasses.field(default_factory=list)


class PairBatch:
    """All training pairs stacked as tensors."""

    def __init__(self, pairs: Sequence):
        if not pairs:
            raise DataError("training set is empty")
        self.template = torch.cat([image_to_tensor(p.template_img) for p in pairs])
        self.body = torch.cat([image_to_tensor(p.body_img) for p in pairs])
        self.target = torch.cat([image_to_tensor(p.target_img) for p in pairs])
        self.mask = torch.cat([mask_to_tensor(p.mask) for p in pairs])
        self.views = torch.tensor([VIEWS.index(p.template_img.view) for p in pairs])
        kinds = {p.template_img.kind for p in pairs} | {p.target_img.kind for p in pairs}
        if len(kinds) != 1:
            raise DataError(f"training pairs mix modalities: {sorted(kinds)}")
        self.kind = kinds.pop()

    def __len__(self) -> int:
        return self.template.shape[0]


def batch_loss(net: TransferNet, data: PairBatch, index: torch.Tensor) -> torch.Tensor:
    """Sum over views of the masked L1 of the selected pairs."""
    pred = net(data.template[index], data.body[index], data.mask[index])
    views = data.views[index]
    loss = pred.new_zeros(())
    for v in range(len(VIEWS)):
        hit = views == v
        if hit.any():
            loss = loss + masked_l1(pred[hit], data.target[index][hit], data.mask[index][hit])
    return loss


def build_network(net_cfg: TransferNetConfig, seed: int) -> TransferNet:
    """Seeded network construction."""
    torch.manual_seed(seed)
    return TransferNet(net_cfg)


def save_training_checkpoint(path: str,
                             net: TransferNet,
                             adam: AdamState,
                             state: TrainingState,
                             cfg: TrainingConfig):
    """Write parameters and Adam moments plus the JSON training record."""
    arrays = {}
    names = [name for name, _ in net.named_parameters()]
    for index, (name, param) in enumerate(net.named_parameters()):
        arrays[name] = param
        first, second = adam.moments(index)
        arrays[f"adam.exp_avg.{name}"] = first
        arrays[f"adam.exp_avg_sq.{name}"] = second
    extra = {
        "kind": "transfer_net",
        "modality": cfg.modality,
        "network": net.cfg.to_dict(),
        "training": cfg.to_dict(),
        "parameters": names,
        "adam_step": adam.step_count,
        "iteration": state.iteration,
        "history": state.history,
        "rng_state": state.rng_state,
        "queue": state.queue,
    }
    save_checkpoint(path, arrays, extra)
    history_path = os.path.splitext(path)[0] + ".history.json"
    with open(history_path, "w") as f:
        json.dump({"schema_version": 1, "modality": cfg.modality, "loss": state.history}, f)


def load_network(path: str) -> Tuple[TransferNet, dict]:
    """
    Rebuild a network from a checkpoint.

    Returns:
        (network in eval mode, checkpoint metadata)

    Raises:
        DataError: If the checkpoint is not a transfer network
    """
    arrays, extra = load_checkpoint(path)
    if extra.get("kind") != "transfer_net":
        raise DataError(f"{path} is not a transfer network checkpoint")
    net = TransferNet(TransferNetConfig.from_dict(extra["network"]))
    state = {name: torch.from_numpy(arrays[name]) for name in extra["parameters"]}
    missing = set(dict(net.named_parameters())) - set(state)
    if missing:
        raise DataError(f"{path} lacks parameters {sorted(missing)}")
    net.load_state_dict(state, strict=False)
    net.eval()
    return net, extra


def _restore(path: str, net: TransferNet, adam: AdamState) -> TrainingState:
    arrays, extra = load_checkpoint(path)
    params = dict(net.named_parameters())
    with torch.no_grad():
        for name, param in params.items():
            if name not in arrays:
                raise DataError(f"{path} lacks parameter '{name}'")
            param.copy_(torch.from_numpy(arrays[name]))
    step = int(extra.get("adam_step", 0))
    if step:
        for param, name in zip(adam.params, params):
            adam.optimizer.state[param] = {
                "step": torch.tensor(float(step)),
                "exp_avg": torch.from_numpy(arrays[f"adam.exp_avg.{name}"]).clone(),
                "exp_avg_sq": torch.from_numpy(arrays[f"adam.exp_avg_sq.{name}"]).clone(),
            }
    logger.info("resumed %s at iteration %d", path, extra["iteration"])
    return TrainingState(extra["iteration"], list(extra["history"]), extra["rng_state"],
                         list(extra.get("queue", [])))


def train(net: TransferNet,
          dataset: Sequence,
          cfg: TrainingConfig,
          resume_from: Optional[str] = None,
          checkpoint_path: Optional[str] = None,
          progress: bool = True) -> Tuple[TransferNet, List[float]]:
    """
    Fit a transfer network with Adam on seeded, shuffled minibatches.

    Args:
        net: Network to train in place
        dataset: TransferPairs (template_img, body_img, target_img, mask)
        cfg: Training settings
        resume_from: Checkpoint to continue from
        checkpoint_path: Where to write the final checkpoint
        progress: Show a progress bar

    Returns:
        (trained network, loss of every iteration since the first run began)
    """
    data = PairBatch(dataset)
    if data.kind != cfg.modality:
        raise DataError(f"{data.kind} pairs given to a {cfg.modality} training run")
    net.train()
    params = dict(net.named_parameters())
    adam = AdamState(list(params.values()), cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    state = TrainingState()
    if resume_from:
        state = _restore(resume_from, net, adam)
        rng.bit_generator.state = state.rng_state
    batch_size = min(cfg.batch_size, len(data))

    bar = tqdm(range(state.iteration, cfg.iterations), desc=f"train {cfg.modality}",
               disable=not progress or not logger.isEnabledFor(logging.INFO))
    for iteration in bar:
        if len(state.queue) < batch_size:
            state.queue.extend(int(i) for i in rng.permutation(len(data)))
        chosen = sorted(state.queue[:batch_size])
        del state.queue[:batch_size]

        tape = Tape(params)
        loss = batch_loss(net, data, torch.tensor(chosen))
        grads = tape.backward(loss)
        adam_step(adam, adam.params, list(grads.values()))

        value = float(loss.detach())
        state.history.append(value)
        state.iteration = iteration + 1
        if not np.isfinite(value):
            raise DataError(f"non-finite training loss at iteration {iteration}")
        if iteration % cfg.log_every == 0:
            logger.debug("%s iteration %d loss %.6f", cfg.modality, iteration, value)
        bar.set_postfix(loss=f"{value:.5f}")

    state.rng_state = rng.bit_generator.state
    if state.history:
        logger.info("%s training: loss %.6f -> %.6f over %d iterations", cfg.modality,
                    state.history[0], state.history[-1], len(state.history))
    if checkpoint_path:
        save_training_checkpoint(checkpoint_path, net, adam, state, cfg)
    net.eval()
    return net, state.history
