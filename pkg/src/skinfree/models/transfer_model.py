"""
Inference wrapper bundling the position and normal transfer networks.
"""

import logging
from typing import Dict, Optional

import torch

from ..raster.camera import VIEWS
from ..raster.encoding import AttributeImage
from .training import load_network
from .transfer_net import TransferNet, forward_transfer

logger = logging.getLogger(__name__)


class TransferModel:
    """
    Position and normal transfer networks used together at inference time.
    """

    def __init__(self,
                 position_net: TransferNet,
                 normal_net: TransferNet,
                 device: str = None):
        """
        Initialize the model.

        Args:
            position_net: Network trained on position images
            normal_net: Network trained on normal images
            device: Device to use ('cuda', 'cpu', or None for auto)
        """
        if position_net is normal_net:
            raise ValueError("position and normal networks must be separate instances")
        if device is None:
            self.device = 'cuda' if torch.cuda.is_available() else 'cpu'
        else:
            self.device = device
        self.nets = {"position": position_net.to(self.device).eval(),
                     "normal": normal_net.to(self.device).eval()}

    @classmethod
    def from_checkpoints(cls,
                         position_ckpt: str,
                         normal_ckpt: str,
                         device: str = None) -> "TransferModel":
        """
        Load both networks.

        Raises:
            FileNotFoundError: If a checkpoint is missing
        """
        logger.info("loading transfer networks from %s and %s", position_ckpt, normal_ckpt)
        position_net, _ = load_network(position_ckpt)
        normal_net, _ = load_network(normal_ckpt)
        return cls(position_net, normal_net, device)

    def predict(self,
                template_imgs: Dict[str, Dict[str, AttributeImage]],
                body_imgs: Dict[str, Dict[str, AttributeImage]],
                modalities: Optional[tuple] = None) -> Dict[str, Dict[str, AttributeImage]]:
        """
        Predict posed garment images for both views.

        Args:
            template_imgs: modality -> view -> template image
            body_imgs: modality -> view -> body image
            modalities: Subset of ("position", "normal") to run

        Returns:
            modality -> view -> predicted image
        """
        out = {}
        for modality in modalities or ("position", "normal"):
            net = self.nets[modality]
            out[modality] = {
                view: forward_transfer(net, template_imgs[modality][view],
                                       body_imgs[modality][view])
                for view in VIEWS
            }
        return out

    def get_model_info(self) -> dict:
        """
        Get information about the loaded networks.

        Returns:
            Dictionary with model information
        """
        net = self.nets["position"]
        return {
            'device': self.device,
            'image_size': net.cfg.image_size,
            'patch_size': net.cfg.patch_size,
            'position_parameters': self.nets["position"].num_parameters(),
            'normal_parameters': self.nets["normal"].num_parameters(),
        }

    def __repr__(self) -> str:
        return (f"TransferModel(image_size={self.nets['position'].cfg.image_size}, "
                f"device='{self.device}')")
