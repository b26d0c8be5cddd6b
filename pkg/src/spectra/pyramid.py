"""Multiscale smoothing pyramid consumed by every renderer.

Window widths grow by powers of two from a base width; Gaussian sigmas
follow a geometric series (default ratio 2). Normals are foreshortening
corrected (scaled by 1/z, z clamped at 1e-3) before smoothing and
renormalized after, so grazing normals do not dominate the average.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy import ndimage

from .types import (
    NormalMap,
    ParameterError,
    PyramidLevel,
    SmoothedPyramid,
    normalize_normals,
)

Z_CLAMP = 1e-3


def normals_to_slopes(normals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Foreshortening-corrected slope fields (n_x/n_z, n_y/n_z)."""
    nz = np.maximum(normals[..., 2], Z_CLAMP)
    return normals[..., 0] / nz, normals[..., 1] / nz


def slopes_to_normals(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    n = np.stack([p, q, np.ones_like(p)], axis=-1)
    return normalize_normals(n)


def _masked_gaussian(field: np.ndarray, mask: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian smoothing that ignores masked-out pixels."""
    if sigma <= 0:
        return field.copy()
    m = mask.astype(np.float64)
    num = ndimage.gaussian_filter(field * m, sigma=sigma, mode="nearest")
    den = ndimage.gaussian_filter(m, sigma=sigma, mode="nearest")
    out = field.copy()
    ok = den > 1e-12
    out[ok] = num[ok] / den[ok]
    return out


def smooth_normal_map(nmap: NormalMap, sigma: float) -> NormalMap:
    """Smooth one normal map in slope space and renormalize."""
    p, q = normals_to_slopes(nmap.normals)
    p = _masked_gaussian(p, nmap.mask, sigma)
    q = _masked_gaussian(q, nmap.mask, sigma)
    smoothed = slopes_to_normals(p, q)
    smoothed[~nmap.mask] = nmap.normals[~nmap.mask]
    return NormalMap(normals=smoothed, mask=nmap.mask.copy(), band=nmap.band,
                     albedo=nmap.albedo)


def _edge_aware_smooth(nmap: NormalMap, color: Optional[np.ndarray],
                       sigma: float, sigma_color: float,
                       sigma_normal: float) -> NormalMap:
    """Bilateral per-level smoothing; window capped at 15 px for tractability."""
    from .filtering import joint_bilateral_filter

    window = min(15, 2 * int(np.ceil(2.0 * sigma)) + 1)
    guide = color if color is not None else np.zeros(nmap.mask.shape)
    _, smoothed = joint_bilateral_filter(
        guide, nmap, passes=1, window_px=window, sigma_domain=max(sigma, 0.25),
        sigma_range=sigma_color, sigma_normal=sigma_normal,
    )
    return smoothed


def build_pyramid(
    normals_per_band: dict[str, NormalMap],
    color: Optional[np.ndarray],
    levels: int = 6,
    base_width_px: int = 1,
    sigma_ratio: float = 2.0,
    edge_aware: bool = False,
    edge_sigma_color: float = 10.0,
    edge_sigma_normal: float = 10.0,
) -> SmoothedPyramid:
    """Build the smoothing pyramid for a set of co-registered band normals.

    Level x uses window width base_width * 2**x and Gaussian sigma
    (base_width / 2) * sigma_ratio**x; weights are the normalized kernel
    widths sigma_x / sum(sigma).

    edge_aware switches the per-level smoothing to the joint bilateral
    filter with the wide color/normal range widths (default 10 each), a
    separate parameter set from the minimal-filtering pass in
    filtering.joint_bilateral_filter.
    """
    if levels < 1:
        raise ParameterError(f"levels must be >= 1, got {levels}")
    if base_width_px < 1:
        raise ParameterError(f"base_width_px must be >= 1, got {base_width_px}")
    if sigma_ratio <= 1.0:
        raise ParameterError(f"sigma_ratio must be > 1, got {sigma_ratio}")

    widths = [base_width_px * 2**x for x in range(levels)]
    sigmas = np.array(
        [0.5 * base_width_px * sigma_ratio**x for x in range(levels)]
    )
    weights = sigmas / sigmas.sum()

    out_levels = []
    for width, sigma in zip(widths, sigmas):
        if edge_aware:
            level_normals = {
                label: _edge_aware_smooth(nmap, color, sigma,
                                          edge_sigma_color, edge_sigma_normal)
                for label, nmap in normals_per_band.items()
            }
        else:
            level_normals = {
                label: smooth_normal_map(nmap, sigma)
                for label, nmap in normals_per_band.items()
            }
        if color is not None:
            col = np.asarray(color, dtype=np.float64)
            if col.ndim == 2:
                level_color = ndimage.gaussian_filter(col, sigma, mode="nearest")
            else:
                level_color = np.stack(
                    [
                        ndimage.gaussian_filter(col[..., c], sigma, mode="nearest")
                        for c in range(col.shape[2])
                    ],
                    axis=-1,
                )
        else:
            level_color = None
        out_levels.append(
            PyramidLevel(
                normals=level_normals,
                color=level_color,
                kernel_width_px=float(width),
                sigma=float(sigma),
            )
        )

    return SmoothedPyramid(levels=out_levels, weights=weights)
