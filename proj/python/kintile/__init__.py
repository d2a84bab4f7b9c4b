"""Python access to the kintile engine."""

import json

from . import _core
from ._core import (
    Generator,
    KinError,
    histogram_correlation,
    read_container,
    read_image,
    seam_discrepancy,
    sobel_gradient_ycbcr,
    ssim,
    stats_similarity_csv,
    write_container,
    write_image,
)

__all__ = [
    "Generator",
    "KinError",
    "histogram_correlation",
    "read_container",
    "read_image",
    "seam_discrepancy",
    "sobel_gradient_ycbcr",
    "ssim",
    "stats_similarity_csv",
    "translate",
    "write_container",
    "write_image",
]


def translate(image, generator, **options):
    """Translate a (3, H, W) float32 image; returns (output, report dict)."""
    output, report = _core.translate(image, generator, **options)
    return output, json.loads(report)
