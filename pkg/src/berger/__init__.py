"""Berger-sphere geometry, a discrete Plateau solver and sister surfaces in H^2 x R."""

from .core import (
    AmbientIsometry,
    BergerParams,
    GeometryError,
    IsometryRejected,
    check_isometry,
    christoffel_fd,
    frame_at,
    hopf_project,
    left_translation,
    metric_eval,
    quat_mul,
)

__all__ = [
    "AmbientIsometry",
    "BergerParams",
    "GeometryError",
    "IsometryRejected",
    "check_isometry",
    "christoffel_fd",
    "frame_at",
    "hopf_project",
    "left_translation",
    "metric_eval",
    "quat_mul",
]
