"""Numerical laboratory for Ricci flow with surgery-before-blowup on
rotationally symmetric 3-manifolds."""

from .config import FlowConfig
from .geometry import (
    CurvatureField,
    MetricSlice,
    Topology,
    compute_curvature,
    cylinder,
    flat_ball,
    resample,
    ResamplePolicy,
    round_sphere,
    validate_slice,
)

__version__ = "0.1.0"

__all__ = [
    "FlowConfig",
    "CurvatureField",
    "MetricSlice",
    "Topology",
    "compute_curvature",
    "cylinder",
    "flat_ball",
    "resample",
    "ResamplePolicy",
    "round_sphere",
    "validate_slice",
    "__version__",
]
