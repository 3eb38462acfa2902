"""Configuration and file utilities."""

from .config import Config, dataclass_from_dict
from .image_io import ImageIO

__all__ = [
    'Config',
    'dataclass_from_dict',
    'ImageIO',
]
