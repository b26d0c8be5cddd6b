"""RGB <-> YUV conversion (BT.601) and luminance helpers."""

from __future__ import annotations

import numpy as np

from .types import ParameterError

# BT.601 luma with analog chroma: U = 0.492 (B - Y), V = 0.877 (R - Y).
# Building the rows from the luma row keeps white chroma exactly zero.
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)
_RGB_TO_YUV = np.stack(
    [
        _LUMA,
        0.492 * (np.array([0.0, 0.0, 1.0]) - _LUMA),
        0.877 * (np.array([1.0, 0.0, 0.0]) - _LUMA),
    ]
)
_YUV_TO_RGB = np.linalg.inv(_RGB_TO_YUV)


def _check_finite(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if not np.all(np.isfinite(image)):
        raise ParameterError("image contains non-finite values")
    return image


def rgb_to_yuv(image: np.ndarray) -> np.ndarray:
    """Convert an (H, W, 3) RGB image to YUV; Y is the luminance channel."""
    image = _check_finite(image)
    return image @ _RGB_TO_YUV.T


def yuv_to_rgb(image: np.ndarray) -> np.ndarray:
    image = _check_finite(image)
    return image @ _YUV_TO_RGB.T


def luminance(image: np.ndarray) -> np.ndarray:
    """Scalar luminance of a grayscale or RGB image."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    if image.ndim == 3 and image.shape[2] == 3:
        return image @ _RGB_TO_YUV[0]
    raise ParameterError(f"expected (H, W) or (H, W, 3) image, got {image.shape}")
