"""Evaluation metrics and reports."""

from .evaluation import (
    ClipEval,
    StedResult,
    collision_rate,
    evaluate_clip,
    hausdorff,
    relative_edge_errors,
    rmse,
    sted,
    write_report,
)

__all__ = [
    'ClipEval',
    'StedResult',
    'collision_rate',
    'evaluate_clip',
    'hausdorff',
    'relative_edge_errors',
    'rmse',
    'sted',
    'write_report',
]
