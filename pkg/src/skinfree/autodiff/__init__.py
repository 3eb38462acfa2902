"""Reverse-mode differentiation, Adam and checkpoints (torch-backed)."""

from .engine import AdamState, Tape, adam_step, gradient_check, set_determinism
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    'AdamState',
    'Tape',
    'adam_step',
    'gradient_check',
    'set_determinism',
    'load_checkpoint',
    'save_checkpoint',
]
