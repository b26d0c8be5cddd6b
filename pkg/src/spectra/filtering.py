"""Joint bilateral filtering of color images and normal maps."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .types import NormalMap, ParameterError, StructuralError, normalize_normals


def _as_3d(image: np.ndarray) -> tuple[np.ndarray, bool]:
    if image.ndim == 2:
        return image[..., None], True
    return image, False


def joint_bilateral_filter(
    color: np.ndarray,
    normals: NormalMap,
    passes: int = 9,
    window_px: int = 3,
    sigma_domain: float = 0.25,
    sigma_range: float = 5.0,
    sigma_normal: float = 1.0,
) -> tuple[np.ndarray, NormalMap]:
    """Jointly smooth a color image and its normal map.

    Each neighbor's weight combines spatial distance, color difference and
    normal difference; both signals are averaged with the same weights, so
    each output pixel is a convex combination of masked-in neighborhood
    inputs. Masked-out pixels are left untouched and excluded from every
    neighborhood. Defaults follow minimal-filtering practice: 9 passes of a
    3 pixel window with kernel widths 0.25 / 5 / 1.
    """
    if window_px < 1 or window_px % 2 == 0:
        raise ParameterError(f"window_px must be odd and >= 1, got {window_px}")
    if passes < 0:
        raise ParameterError(f"passes must be >= 0, got {passes}")

    color = np.asarray(color, dtype=np.float64)
    if color.shape[:2] != normals.mask.shape:
        raise StructuralError("color and normal map dimensions differ")

    if passes == 0:
        return color.copy(), normals.copy()

    img, was_2d = _as_3d(color)
    img = img.copy()
    nrm = normals.normals.copy()
    mask = normals.mask
    radius = window_px // 2
    inv2_d = 1.0 / (2.0 * sigma_domain**2)
    inv2_r = 1.0 / (2.0 * sigma_range**2)
    inv2_n = 1.0 / (2.0 * sigma_normal**2)

    offsets = [
        (dy, dx)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
    ]
    h, w = mask.shape

    for _ in range(passes):
        num_img = np.zeros_like(img)
        num_nrm = np.zeros_like(nrm)
        den = np.zeros((h, w), dtype=np.float64)
        for dy, dx in offsets:
            ys0, ys1 = max(0, -dy), min(h, h - dy)
            xs0, xs1 = max(0, -dx), min(w, w - dx)
            dst = (slice(ys0, ys1), slice(xs0, xs1))
            src = (slice(ys0 + dy, ys1 + dy), slice(xs0 + dx, xs1 + dx))

            ok = mask[src]
            w_dom = np.exp(-(dy * dy + dx * dx) * inv2_d)
            d_col = np.sum((img[src] - img[dst]) ** 2, axis=-1)
            d_nrm = np.sum((nrm[src] - nrm[dst]) ** 2, axis=-1)
            weight = ok * w_dom * np.exp(-d_col * inv2_r - d_nrm * inv2_n)

            num_img[dst] += weight[..., None] * img[src]
            num_nrm[dst] += weight[..., None] * nrm[src]
            den[dst] += weight

        ok = mask & (den > 0)
        img[ok] = num_img[ok] / den[ok][..., None]
        nrm[ok] = num_nrm[ok] / den[ok][..., None]
        nrm = normalize_normals(nrm, mask)

    out_color = img[..., 0] if was_2d else img
    out = NormalMap(normals=nrm, mask=mask.copy(), band=normals.band,
                    albedo=None if normals.albedo is None else normals.albedo.copy())
    return out_color, out
