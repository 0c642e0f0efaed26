"""Event-camera human-pose data path: rasterized event point clouds, edge
enhancement, temporal slice tokens, a toy forward path, and two-view
triangulation."""

from ._evpose import (
    __version__,
    enhance,
    es_seq,
    etsc_forward,
    forward,
    grad_check,
    mpjpe_2d,
    mpjpe_3d,
    point_cloud,
    project,
    rasterize,
    sample_points,
    synth_events,
    triangulate,
)

__all__ = [
    "__version__",
    "enhance",
    "es_seq",
    "etsc_forward",
    "forward",
    "grad_check",
    "mpjpe_2d",
    "mpjpe_3d",
    "point_cloud",
    "project",
    "rasterize",
    "sample_points",
    "synth_events",
    "triangulate",
]
