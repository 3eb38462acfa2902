"""Image-transfer networks, their training loop and the inference wrapper."""

from .transfer_net import (
    TransferNet,
    TransferNetConfig,
    RefineBlock,
    decode_image,
    forward_transfer,
    image_to_tensor,
    mask_to_tensor,
    masked_l1,
    patch_encode,
    refine_block,
)
from .training import (
    PairBatch,
    TrainingConfig,
    TrainingState,
    batch_loss,
    build_network,
    load_network,
    save_training_checkpoint,
    train,
)
from .transfer_model import TransferModel

__all__ = [
    'TransferNet',
    'TransferNetConfig',
    'RefineBlock',
    'decode_image',
    'forward_transfer',
    'image_to_tensor',
    'mask_to_tensor',
    'masked_l1',
    'patch_encode',
    'refine_block',
    'PairBatch',
    'TrainingConfig',
    'TrainingState',
    'batch_loss',
    'build_network',
    'load_network',
    'save_training_checkpoint',
    'train',
    'TransferModel',
]
