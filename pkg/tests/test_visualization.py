import json

import matplotlib.pyplot as plt
import numpy as np

from skinfree.raster import AttributeImage
from skinfree.visualization import AttributeVisualizer


def _image(view="front", kind="normal"):
    rng = np.random.default_rng(0)
    mask = np.zeros((8, 8), dtype=bool)
    mask[2:6, 2:6] = True
    return AttributeImage(rng.uniform(size=(8, 8, 3)), mask, view, kind)


def _trace():
    trace = []
    for stage, terms in (("stage1", ("edge", "reg_visible")),
                         ("stage2", ("normal_render", "edge", "collision"))):
        for step in range(4):
            entry = {"stage": stage, "step": step, "total": 1.0 / (step + 1)}
            entry.update({term: 0.5 / (step + 1) for term in terms})
            trace.append(entry)
    return trace


def test_show_attribute_image_title():
    fig = AttributeVisualizer.show_attribute_image(_image())
    assert fig.axes[0].get_title() == "garment normal (front)"
    plt.close(fig)


def test_show_views_grid_and_empty():
    fig = AttributeVisualizer.show_views([_image(), _image("back"), _image(kind="position")])
    visible = [ax for ax in fig.axes if ax.get_visible()]
    assert len(visible) == 3
    plt.close(fig)

    fig = AttributeVisualizer.show_views([])
    assert fig is not None
    plt.close(fig)


def test_loss_and_trace_plots():
    fig = AttributeVisualizer.plot_loss_history({"position": [0.3, 0.2, 0.1],
                                                 "normal": [0.5, 0.4, 0.35]})
    assert len(fig.axes[0].get_lines()) == 2
    plt.close(fig)

    fig = AttributeVisualizer.plot_fusion_trace(_trace())
    assert [ax.get_title() for ax in fig.axes] == ["stage1", "stage2"]
    assert len(fig.axes[1].get_lines()) == 4
    plt.close(fig)


def test_metrics_plot_and_save(tmp_path):
    frames = [{"name": str(i), "rmse": 1.0 + i, "hausdorff": 2.0 + i, "collision": 0.0}
              for i in range(3)]
    report = {"schema_version": 1,
              "methods": {"fused": {"frames": frames}, "template": {"frames": frames}}}
    fig = AttributeVisualizer.plot_metrics(json.loads(json.dumps(report)))
    assert len(fig.axes) == 2
    path = tmp_path / "figures" / "metrics.png"
    AttributeVisualizer.save_visualization(fig, str(path))
    assert path.exists() and path.stat().st_size > 0
    assert not plt.fignum_exists(fig.number)
