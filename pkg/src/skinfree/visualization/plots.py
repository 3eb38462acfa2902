"""
Visualization module for skinfree.

This module provides figures of attribute images, training curves, fusion
traces and evaluation reports.
"""

import logging
import os
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from ..raster.encoding import AttributeImage

logger = logging.getLogger(__name__)


class AttributeVisualizer:
    """
    Visualizer class for attribute images, loss curves and metrics.
    """

    @staticmethod
    def show_attribute_image(image: AttributeImage,
                             figsize: Tuple[int, int] = (5, 5),
                             title: Optional[str] = None) -> plt.Figure:
        """
        Display one attribute image.

        Args:
            image: Attribute image (values in [0, 1])
            figsize: Figure size (width, height)
            title: Custom title (None for auto-generated)

        Returns:
            matplotlib Figure object
        """
        fig, ax = plt.subplots(figsize=figsize)
        ax.imshow(np.clip(image.pixels, 0.0, 1.0), interpolation="nearest")
        ax.set_title(title or f"{image.owner} {image.kind} ({image.view})")
        ax.axis("off")
        return fig

    @staticmethod
    def show_views(images: Sequence[AttributeImage],
                   cols: int = 2,
                   figsize: Tuple[int, int] = (10, 10)) -> plt.Figure:
        """
        Display several attribute images in a grid layout.

        Args:
            images: Images to display
            cols: Number of columns in the grid
            figsize: Figure size (width, height)

        Returns:
            matplotlib Figure object
        """
        if not images:
            fig = plt.figure(figsize=figsize)
            plt.text(0.5, 0.5, 'No images to display',
                     horizontalalignment='center', verticalalignment='center',
                     transform=plt.gca().transAxes, fontsize=16)
            return fig

        rows = (len(images) + cols - 1) // cols
        fig, axes = plt.subplots(rows, cols, figsize=figsize, squeeze=False)
        axes = axes.flatten()
        for ax, image in zip(axes, images):
            ax.imshow(np.clip(image.pixels, 0.0, 1.0), interpolation="nearest")
            ax.set_title(f"{image.owner} {image.kind} ({image.view})", fontsize=10)
            ax.axis("off")

        # Hide empty subplots
        for ax in axes[len(images):]:
            ax.set_visible(False)

        plt.tight_layout()
        return fig

    @staticmethod
    def plot_loss_history(history: Dict[str, List[float]],
                          figsize: Tuple[int, int] = (8, 5)) -> plt.Figure:
        """
        Plot training loss curves.

        Args:
            history: Curve label -> loss per iteration

        Returns:
            matplotlib Figure object
        """
        fig, ax = plt.subplots(figsize=figsize)
        for label, values in history.items():
            ax.plot(np.arange(len(values)), values, label=label)
        ax.set_xlabel('Iteration')
        ax.set_ylabel('Masked L1')
        ax.set_yscale('log')
        ax.set_title('Training Loss')
        ax.grid(True, alpha=0.3)
        ax.legend()
        return fig

    @staticmethod
    def plot_fusion_trace(trace: List[Dict[str, float]],
                          figsize: Tuple[int, int] = (12, 5)) -> plt.Figure:
        """
        Plot every loss term of both fusion stages on a log scale.

        Args:
            trace: Per-step entries as written by the fusion

        Returns:
            matplotlib Figure object
        """
        stages = sorted({entry["stage"] for entry in trace})
        fig, axes = plt.subplots(1, max(len(stages), 1), figsize=figsize, squeeze=False)
        for ax, stage in zip(axes[0], stages):
            entries = [e for e in trace if e["stage"] == stage]
            terms = [k for k in entries[0] if k not in ("stage", "step")]
            steps = [e["step"] for e in entries]
            for term in terms:
                values = np.maximum([e[term] for e in entries], 1e-16)
                ax.plot(steps, values, label=term, linewidth=2 if term == "total" else 1)
            ax.set_yscale('log')
            ax.set_xlabel('Step')
            ax.set_title(stage)
            ax.grid(True, alpha=0.3)
            ax.legend(fontsize=8)
        plt.tight_layout()
        return fig

    @staticmethod
    def plot_metrics(report: dict,
                     figsize: Tuple[int, int] = (12, 5)) -> plt.Figure:
        """
        Per-frame RMSE and Hausdorff bars of every method in a report.

        Args:
            report: Evaluation report as written by write_report

        Returns:
            matplotlib Figure object
        """
        methods = report["methods"]
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=figsize)
        width = 0.8 / max(len(methods), 1)
        for i, (name, method) in enumerate(methods.items()):
            frames = method["frames"]
            x = np.arange(len(frames)) + i * width
            ax1.bar(x, [f["rmse"] for f in frames], width, label=name, alpha=0.8)
            ax2.bar(x, [f["hausdorff"] for f in frames], width, label=name, alpha=0.8)
        for ax, label in ((ax1, 'RMSE (mm)'), (ax2, 'Hausdorff (mm)')):
            ax.set_xlabel('Frame')
            ax.set_ylabel(label)
            ax.grid(True, alpha=0.3)
            ax.legend()
        plt.tight_layout()
        return fig

    @staticmethod
    def save_visualization(fig: plt.Figure,
                           filename: str,
                           dpi: int = 150,
                           bbox_inches: str = 'tight'):
        """
        Save a visualization to file.

        Args:
            fig: matplotlib Figure object
            filename: Output filename
            dpi: Resolution for raster formats
            bbox_inches: Bounding box mode for saving
        """
        directory = os.path.dirname(filename)
        if directory:
            os.makedirs(directory, exist_ok=True)
        fig.savefig(filename, dpi=dpi, bbox_inches=bbox_inches)
        plt.close(fig)
        logger.info("Visualization saved to: %s", filename)
