"""Python bindings for the mmrecon reconstruction library.

Images are complex128 arrays of shape (H, W); multi-coil data and coil maps
are (C, H, W). Sampling masks are lists of column indices.
"""

from ._core import (
    ConfigError,
    DataError,
    Error,
    NumericalError,
    ShapeError,
    VersionError,
    apply_e,
    apply_eh,
    cg_sense,
    coil_maps,
    fft2c,
    ifft2c,
    loss_l1l2,
    partition_masks,
    phantom,
    psnr,
    random_mask,
    reconstruct,
    ssim,
    uniform_mask,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "NumericalError",
    "ShapeError",
    "VersionError",
    "apply_e",
    "apply_eh",
    "cg_sense",
    "coil_maps",
    "fft2c",
    "ifft2c",
    "loss_l1l2",
    "partition_masks",
    "phantom",
    "psnr",
    "random_mask",
    "reconstruct",
    "ssim",
    "uniform_mask",
]
