"""Figures of images, loss curves and evaluation reports."""

from .plots import AttributeVisualizer

__all__ = ['AttributeVisualizer']
