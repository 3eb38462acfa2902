"""
Image file utilities for skinfree.

Attribute images are stored as PFM (3-channel, little-endian, bottom-up rows),
silhouettes as binary PGM and previews as PPM.
"""

import os
from typing import Union

import numpy as np
from PIL import Image

from ..errors import DataError
from ..raster.encoding import AttributeImage
from ..raster.rasterizer import Silhouette


class ImageIO:
    """Readers and writers for the image formats used by the pipeline."""

    @staticmethod
    def write_pfm(path: str, pixels: np.ndarray):
        """
        Write an H x W x 3 float image as little-endian PFM.

        Args:
            path: Output file path
            pixels: Image data; stored as 32-bit floats
        """
        pixels = np.asarray(pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValueError(f"PFM export needs H x W x 3 data, got {pixels.shape}")
        _ensure_parent(path)
        height, width = pixels.shape[:2]
        header = f"PF\n{width} {height}\n-1.0\n".encode("ascii")
        data = np.flipud(pixels).astype("<f4").tobytes()
        with open(path, "wb") as f:
            f.write(header)
            f.write(data)

    @staticmethod
    def read_pfm(path: str) -> np.ndarray:
        """
        Read a 3-channel PFM file.

        Args:
            path: PFM file path

        Returns:
            (H, W, 3) float32 array with row 0 at the top

        Raises:
            FileNotFoundError: If the file doesn't exist
            DataError: If the header or payload is malformed
        """
        if not os.path.exists(path):
            raise FileNotFoundError(f"PFM file not found: {path}")
        with open(path, "rb") as f:
            magic = f.readline().strip()
            if magic != b"PF":
                raise DataError(f"{path}: not a colour PFM file")
            try:
                width, height = (int(v) for v in f.readline().split())
                scale = float(f.readline().strip())
            except ValueError:
                raise DataError(f"{path}: malformed PFM header")
            dtype = "<f4" if scale < 0 else ">f4"
            data = np.frombuffer(f.read(), dtype=dtype)
        if data.size != width * height * 3:
            raise DataError(f"{path}: expected {width * height * 3} floats, found {data.size}")
        return np.flipud(data.reshape(height, width, 3)).astype(np.float32)

    @staticmethod
    def write_silhouette(path: str, silhouette: Silhouette):
        """Store a silhouette as binary PGM (255 = foreground)."""
        _ensure_parent(path)
        image = Image.fromarray(np.where(silhouette.mask, 255, 0).astype(np.uint8))
        image.save(path, format="PPM")

    @staticmethod
    def read_silhouette(path: str, view: str) -> Silhouette:
        """Load a PGM silhouette written by write_silhouette."""
        if not os.path.exists(path):
            raise FileNotFoundError(f"silhouette file not found: {path}")
        with Image.open(path) as image:
            mask = np.array(image.convert("L")) > 127
        return Silhouette(mask, view)

    @staticmethod
    def write_preview(path: str, image: Union[AttributeImage, np.ndarray]):
        """Export values x 255, clamped, as a PPM for visual inspection only."""
        pixels = image.pixels if isinstance(image, AttributeImage) else np.asarray(image)
        _ensure_parent(path)
        rgb = np.clip(np.rint(pixels * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(rgb).save(path, format="PPM")

    @staticmethod
    def save_attribute_image(path: str, image: AttributeImage):
        ImageIO.write_pfm(path, image.pixels)

    @staticmethod
    def load_attribute_image(path: str,
                             mask: Union[Silhouette, np.ndarray],
                             view: str,
                             kind: str,
                             owner: str) -> AttributeImage:
        """
        Load a PFM attribute image together with its silhouette.

        Args:
            path: PFM file path
            mask: Silhouette (or boolean array) of the image
            view: View label
            kind: "position" or "normal"
            owner: "garment" or "body"

        Returns:
            AttributeImage
        """
        pixels = ImageIO.read_pfm(path)
        mask_array = mask.mask if isinstance(mask, Silhouette) else np.asarray(mask, dtype=bool)
        if pixels.shape[:2] != mask_array.shape:
            raise DataError(f"{path}: image {pixels.shape[:2]} and mask {mask_array.shape} differ")
        return AttributeImage(pixels, mask_array, view, kind, owner)


def _ensure_parent(path: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
