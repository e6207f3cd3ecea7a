"""Spatial-frequency image fusion."""

from ._core import (
    FormatError,
    Model,
    NumericError,
    ShapeError,
    entropy,
    fft2,
    metrics,
    read_luminance,
    run_cli,
    spatial_frequency,
    ssim_metric,
    write_gray,
)

__all__ = [
    "FormatError",
    "Model",
    "NumericError",
    "ShapeError",
    "entropy",
    "fft2",
    "metrics",
    "read_luminance",
    "run_cli",
    "spatial_frequency",
    "ssim_metric",
    "write_gray",
]
