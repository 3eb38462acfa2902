"""
Image-transfer network: maps a garment template attribute image and a posed
body attribute image of the same view to the posed garment attribute image.

Layout: linear patch projection with learned positional embeddings, a stack
of refinement blocks (cross-attention from garment to body tokens,
self-attention, MLP), and a convolutional decoder that upsamples the token
grid back to the image and adds the result to the template image.
"""

import dataclasses
import math
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn as nn

from ..errors import DataError
from ..raster.encoding import AttributeImage
from ..raster.rasterizer import Silhouette
from ..utils.config import dataclass_from_dict


@dataclasses.dataclass(frozen=True)
class TransferNetConfig:
    """
    Architecture of one transfer network.

    Attributes:
        image_size: Square input/output resolution
        patch_size: Patch edge; must be a power of two
        dim: Token dimension D
        heads: Attention heads
        blocks: Number of refinement blocks K
        mlp_ratio: Hidden width of the block MLP as a multiple of D
        decoder_channels: Output channels of each stride-2 upsampling layer,
            one per factor of two in patch_size
        residual_blocks: Residual conv blocks on the token grid
        residual_output: Add the decoded image to the template image
    """
    image_size: int = 256
    patch_size: int = 16
    dim: int = 128
    heads: int = 4
    blocks: int = 4
    mlp_ratio: int = 4
    decoder_channels: Tuple[int, ...] = (64, 32, 16, 8)
    residual_blocks: int = 2
    residual_output: bool = True

    def __post_init__(self):
        object.__setattr__(self, "decoder_channels", tuple(int(c) for c in self.decoder_channels))
        if self.image_size % self.patch_size:
            raise ValueError(f"image size {self.image_size} is not divisible by patch "
                             f"size {self.patch_size}")
        if self.dim % self.heads:
            raise ValueError(f"token dim {self.dim} is not divisible by {self.heads} heads")
        steps = int(round(math.log2(self.patch_size)))
        if 2 ** steps != self.patch_size:
            raise ValueError(f"patch size {self.patch_size} must be a power of two")
        if len(self.decoder_channels) != steps:
            raise ValueError(f"patch size {self.patch_size} needs {steps} decoder channel "
                             f"widths, got {len(self.decoder_channels)}")
        if self.blocks < 1 or self.mlp_ratio < 1 or self.residual_blocks < 0:
            raise ValueError("blocks and mlp_ratio must be positive")

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_tokens(self) -> int:
        return self.grid ** 2

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TransferNetConfig":
        return dataclass_from_dict(cls, data, "transfer_net")

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["decoder_channels"] = list(self.decoder_channels)
        return data


class PatchEncoder(nn.Module):
    """Non-overlapping patches projected linearly to D, plus positional embeddings."""

    def __init__(self, cfg: TransferNetConfig):
        super().__init__()
        self.cfg = cfg
        self.proj = nn.Conv2d(3, cfg.dim, kernel_size=cfg.patch_size, stride=cfg.patch_size)
        self.pos_embed = nn.Parameter(torch.zeros(1, cfg.num_tokens, cfg.dim))
        nn.init.trunc_normal_(self.pos_embed, std=0.02)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        if images.shape[-2:] != (self.cfg.image_size, self.cfg.image_size):
            raise DataError(f"expected {self.cfg.image_size}px images, got "
                            f"{tuple(images.shape[-2:])}")
        tokens = self.proj(images).flatten(2).transpose(1, 2)
        return tokens + self.pos_embed


class RefineBlock(nn.Module):
    """
    Cross-attention, self-attention and MLP, each a pre-normalized residual
    branch: x + f(LayerNorm(x)).
    """

    def __init__(self, cfg: TransferNetConfig):
        super().__init__()
        self.norm_query = nn.LayerNorm(cfg.dim)
        self.norm_body = nn.LayerNorm(cfg.dim)
        self.cross_attn = nn.MultiheadAttention(cfg.dim, cfg.heads, batch_first=True)
        self.norm_self = nn.LayerNorm(cfg.dim)
        self.self_attn = nn.MultiheadAttention(cfg.dim, cfg.heads, batch_first=True)
        self.norm_mlp = nn.LayerNorm(cfg.dim)
        self.mlp = nn.Sequential(
            nn.Linear(cfg.dim, cfg.dim * cfg.mlp_ratio),
            nn.GELU(),
            nn.Linear(cfg.dim * cfg.mlp_ratio, cfg.dim),
        )

    def cross_attention(self, garment: torch.Tensor, body: torch.Tensor,
                        need_weights: bool = False):
        body = self.norm_body(body)
        return self.cross_attn(self.norm_query(garment), body, body,
                               need_weights=need_weights, average_attn_weights=False)

    def forward(self, garment: torch.Tensor, body: torch.Tensor) -> torch.Tensor:
        x = garment + self.cross_attention(garment, body)[0]
        h = self.norm_self(x)
        x = x + self.self_attn(h, h, h, need_weights=False)[0]
        return x + self.mlp(self.norm_mlp(x))

    def attention_weights(self, garment: torch.Tensor, body: torch.Tensor) -> torch.Tensor:
        """Cross-attention weights (B, heads, M, M); each query row sums to 1."""
        return self.cross_attention(garment, body, need_weights=True)[1]

    def zero_init_outputs(self):
        """Zero every branch output so the block is the identity."""
        for layer in (self.cross_attn.out_proj, self.self_attn.out_proj, self.mlp[-1]):
            nn.init.zeros_(layer.weight)
            nn.init.zeros_(layer.bias)


class ResidualConvBlock(nn.Module):

    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.ReLU(),
            nn.Conv2d(channels, channels, 3, padding=1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


class ImageDecoder(nn.Module):
    """Token grid -> residual conv blocks -> stride-2 transposed convs -> RGB."""

    def __init__(self, cfg: TransferNetConfig):
        super().__init__()
        self.cfg = cfg
        self.residual = nn.Sequential(*[ResidualConvBlock(cfg.dim)
                                        for _ in range(cfg.residual_blocks)])
        layers, channels = [], cfg.dim
        for width in cfg.decoder_channels:
            layers += [nn.ConvTranspose2d(channels, width, 4, stride=2, padding=1), nn.ReLU()]
            channels = width
        self.upsample = nn.Sequential(*layers)
        self.head = nn.Conv2d(channels, 3, 3, padding=1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, tokens: torch.Tensor, input_images: torch.Tensor,
                masks: torch.Tensor) -> torch.Tensor:
        batch, _, dim = tokens.shape
        grid = tokens.transpose(1, 2).reshape(batch, dim, self.cfg.grid, self.cfg.grid)
        decoded = self.head(self.upsample(self.residual(grid)))
        if self.cfg.residual_output:
            decoded = decoded + input_images
        return decoded.clamp(0.0, 1.0) * masks


class TransferNet(nn.Module):
    """
    One transfer network; position and normal networks are separate instances.

    A single network serves both views.
    """

    def __init__(self, cfg: TransferNetConfig = TransferNetConfig()):
        super().__init__()
        self.cfg = cfg
        self.encoder = PatchEncoder(cfg)
        self.blocks = nn.ModuleList([RefineBlock(cfg) for _ in range(cfg.blocks)])
        self.decoder = ImageDecoder(cfg)

    def encode(self, images: torch.Tensor) -> torch.Tensor:
        return self.encoder(images)

    def refine(self, garment_tokens: torch.Tensor, body_tokens: torch.Tensor) -> torch.Tensor:
        for block in self.blocks:
            garment_tokens = block(garment_tokens, body_tokens)
        return garment_tokens

    def forward(self, template: torch.Tensor, body: torch.Tensor,
                mask: torch.Tensor) -> torch.Tensor:
        """
        Args:
            template: (B, 3, H, W) template attribute images
            body: (B, 3, H, W) body attribute images
            mask: (B, 1, H, W) template silhouettes

        Returns:
            (B, 3, H, W) predicted garment attribute images
        """
        tokens = self.refine(self.encode(template), self.encode(body))
        return self.decoder(tokens, template, mask)

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


def image_to_tensor(image: AttributeImage) -> torch.Tensor:
    """(H, W, 3) AttributeImage -> (1, 3, H, W) float32 tensor."""
    return torch.from_numpy(np.ascontiguousarray(image.pixels.transpose(2, 0, 1),
                                                 dtype=np.float32)).unsqueeze(0)


def mask_to_tensor(mask: Union[np.ndarray, Silhouette]) -> torch.Tensor:
    mask = mask.mask if isinstance(mask, Silhouette) else np.asarray(mask, dtype=bool)
    return torch.from_numpy(mask.astype(np.float32))[None, None]


def _check_size(net: TransferNet, image: AttributeImage):
    if image.resolution != net.cfg.image_size:
        raise DataError(f"{image.view} {image.kind} image is {image.resolution}px, network "
                        f"expects {net.cfg.image_size}px")


def patch_encode(net: TransferNet, image: AttributeImage) -> torch.Tensor:
    """
    Tokens of one image.

    Returns:
        (M, D) tensor

    Raises:
        DataError: If the image size does not match the network
    """
    _check_size(net, image)
    return net.encode(image_to_tensor(image))[0]


def refine_block(block: RefineBlock, garment_tokens: torch.Tensor,
                 body_tokens: torch.Tensor) -> torch.Tensor:
    """Apply one refinement block to (M, D) or (B, M, D) token sets."""
    single = garment_tokens.dim() == 2
    if single:
        garment_tokens, body_tokens = garment_tokens[None], body_tokens[None]
    out = block(garment_tokens, body_tokens)
    return out[0] if single else out


def decode_image(net: TransferNet, tokens: torch.Tensor,
                 input_image: AttributeImage) -> AttributeImage:
    """Decode (M, D) tokens into an image residual added to `input_image`."""
    with torch.no_grad():
        out = net.decoder(tokens[None].float(), image_to_tensor(input_image),
                          mask_to_tensor(input_image.mask))
    return input_image.with_pixels(out[0].permute(1, 2, 0).double().numpy())


def forward_transfer(net: TransferNet,
                     template_img: AttributeImage,
                     body_img: AttributeImage) -> AttributeImage:
    """
    Predict the posed garment image of one view.

    Args:
        net: Transfer network of the image's modality
        template_img: Garment template attribute image
        body_img: Posed body attribute image of the same view and kind

    Returns:
        Predicted garment image carrying the template silhouette

    Raises:
        DataError: On a view, kind or size mismatch
    """
    if template_img.view != body_img.view:
        raise DataError(f"view mismatch: template {template_img.view}, body {body_img.view}")
    if template_img.kind != body_img.kind:
        raise DataError(f"kind mismatch: template {template_img.kind}, body {body_img.kind}")
    _check_size(net, template_img)
    _check_size(net, body_img)
    device = next(net.parameters()).device
    with torch.no_grad():
        out = net(image_to_tensor(template_img).to(device), image_to_tensor(body_img).to(device),
                  mask_to_tensor(template_img.mask).to(device))
    return template_img.with_pixels(out[0].permute(1, 2, 0).double().cpu().numpy())


def masked_l1(pred, target, mask: Optional[object] = None):
    """
    Mean absolute difference over masked pixels and channels.

    Accepts either AttributeImages (mask defaults to the target's silhouette)
    or tensors shaped (B, C, H, W) with a (B, 1, H, W) mask.

    Returns:
        Python float for images, scalar tensor for tensors; 0 for an empty mask
    """
    if isinstance(pred, AttributeImage):
        if mask is None:
            mask = target.mask
        mask = mask.mask if isinstance(mask, Silhouette) else np.asarray(mask, dtype=bool)
        count = mask.sum() * pred.pixels.shape[-1]
        if count == 0:
            return 0.0
        return float(np.abs(pred.pixels - target.pixels)[mask].sum() / count)

    count = mask.sum() * pred.shape[1]
    total = ((pred - target).abs() * mask).sum()
    return total / count.clamp(min=1.0)
