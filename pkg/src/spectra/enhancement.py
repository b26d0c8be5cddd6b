"""Near-infrared enhancement maps: light-dependent Michelson contrast
(dynamic) and light-independent Weingarten curvature (static), plus their
multi-wavelength variants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .types import (
    Band,
    LightDirection,
    NormalMap,
    ParameterError,
    StructuralError,
)

DEFAULT_DYNAMIC_TH = 0.1
DEFAULT_STATIC_TH = 0.02
DEFAULT_CONTRAST_RADIUS = 13


@dataclass
class LambertianMap:
    """Clamped per-pixel shading n . l for one band under one light."""

    values: np.ndarray  # (H, W) in [0, 1]
    light: LightDirection


@dataclass
class ContrastMap:
    """Michelson modulation over a window of radius r."""

    values: np.ndarray  # (H, W) in [0, 1]
    radius: int


@dataclass
class CurvatureMaps:
    """Principal curvatures, mean curvature and curvature magnitude fields."""

    k1: np.ndarray  # larger principal curvature (signed)
    k2: np.ndarray  # smaller principal curvature (signed)
    mean: np.ndarray  # (k1 + k2) / 2
    k_n: np.ndarray  # curvature magnitude used downstream
    dir1: np.ndarray  # (H, W, 2) unit principal direction for k1
    dir2: np.ndarray  # (H, W, 2) unit principal direction for k2
    mask: np.ndarray


@dataclass
class EnhancementMap:
    """Per-pixel weight in [0, 1] giving the near-infrared contribution."""

    values: np.ndarray
    kind: str  # "dynamic" | "static"
    light: Optional[LightDirection] = None
    radius: Optional[int] = None
    threshold: Optional[float] = None
    winner: Optional[np.ndarray] = None  # per-pixel winning band index

    def __post_init__(self):
        if self.values.min() < -1e-12 or self.values.max() > 1.0 + 1e-12:
            raise StructuralError("enhancement weights must lie in [0, 1]")


def lambertian_map(n: NormalMap, l: LightDirection) -> LambertianMap:
    """chi = clamp(n . l, 0, 1); masked-out pixels contribute 0."""
    chi = np.clip(n.normals @ l.as_array(), 0.0, 1.0)
    chi[~n.mask] = 0.0
    return LambertianMap(values=chi, light=l)


def michelson_contrast(chi: LambertianMap, r: int) -> ContrastMap:
    """Michelson modulation (Lmax - Lmin) / (Lmax + Lmin) over a
    (2r+1)^2 window clipped at the borders; all-zero windows give 0."""
    if r < 1:
        raise ParameterError(f"contrast radius must be >= 1, got {r}")
    size = 2 * r + 1
    lmax = ndimage.maximum_filter(chi.values, size=size, mode="nearest")
    lmin = ndimage.minimum_filter(chi.values, size=size, mode="nearest")
    total = lmax + lmin
    m = np.zeros_like(total)
    ok = total > 0
    m[ok] = (lmax[ok] - lmin[ok]) / total[ok]
    return ContrastMap(values=m, radius=r)


def _threshold_keep(values: np.ndarray, th: float) -> np.ndarray:
    """Zero values below the threshold, keep them unchanged above it."""
    return np.where(values >= th, values, 0.0)


def dynamic_enhancement(
    n_vis: NormalMap,
    n_nir: NormalMap,
    l: LightDirection,
    r: int = DEFAULT_CONTRAST_RADIUS,
    th: float = DEFAULT_DYNAMIC_TH,
) -> EnhancementMap:
    """Light-dependent enhancement from the contrast difference of the two
    bands' Lambertian maps; one-sided, so regions where visible contrast
    dominates are never enhanced."""
    if n_vis.normals.shape != n_nir.normals.shape:
        raise StructuralError("normal maps must share dimensions")
    m_vis = michelson_contrast(lambertian_map(n_vis, l), r).values
    m_nir = michelson_contrast(lambertian_map(n_nir, l), r).values
    phi = np.abs(m_vis - m_nir)
    c = np.where(m_nir > m_vis, _threshold_keep(phi, th), 0.0)
    return EnhancementMap(values=c, kind="dynamic", light=l, radius=r, threshold=th)


SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64) / 8.0
SOBEL_Y = SOBEL_X.T


def _sobel(field: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx = ndimage.convolve(field, SOBEL_X, mode="nearest")
    gy = ndimage.convolve(field, SOBEL_Y, mode="nearest")
    return gx, gy


def curvature_maps(n: NormalMap, z_clamp: float = 1e-3) -> CurvatureMaps:
    """Shape-operator curvature from Sobel-estimated fundamental forms.

    The surface is treated as a graph over the image plane with tangents
    derived from the normal's slopes; Sobel derivatives of the unit normal
    field give the second fundamental form. Signs are chosen so a bump
    toward the viewer has positive curvature (ridges positive, valleys
    negative). Degenerate tangent frames are masked out.
    """
    nz = np.maximum(n.normals[..., 2], z_clamp)
    zx = -n.normals[..., 0] / nz
    zy = -n.normals[..., 1] / nz

    e1 = 1.0 + zx * zx
    f1 = zx * zy
    g1 = 1.0 + zy * zy

    nxx, nxy = _sobel(n.normals[..., 0])
    nyx, nyy = _sobel(n.normals[..., 1])
    nzx, nzy = _sobel(n.normals[..., 2])

    # r_u = (1, 0, zx), r_v = (0, 1, zy); II entries are -r_u . dn so a
    # bump toward the viewer comes out positive
    e2 = -(nxx + zx * nzx)
    f2 = -0.5 * ((nxy + zx * nzy) + (nyx + zy * nzx))
    g2 = -(nyy + zy * nzy)

    det = e1 * g1 - f1 * f1
    mask = n.mask & (det >= 1e-12)
    inv = np.zeros_like(det)
    inv[mask] = 1.0 / det[mask]

    s11 = (e2 * g1 - f2 * f1) * inv
    s12 = (f2 * g1 - g2 * f1) * inv
    s21 = (f2 * e1 - e2 * f1) * inv
    s22 = (g2 * e1 - f2 * f1) * inv

    half_tr = 0.5 * (s11 + s22)
    det_s = s11 * s22 - s12 * s21
    disc = np.sqrt(np.clip(half_tr**2 - det_s, 0.0, None))
    k1 = half_tr + disc
    k2 = half_tr - disc

    # eigenvector of [[s11, s12], [s21, s22]] for eigenvalue k: take the
    # larger of the two candidate rows; isotropic pixels fall back to a
    # fixed convention
    def eigvec(k, fallback_dir):
        ax, ay = s12, k - s11
        bx, by = k - s22, s21
        use_a = ax * ax + ay * ay >= bx * bx + by * by
        vx = np.where(use_a, ax, bx)
        vy = np.where(use_a, ay, by)
        norm = np.sqrt(vx * vx + vy * vy)
        degenerate = norm < 1e-12
        vx = np.where(degenerate, fallback_dir[0], vx)
        vy = np.where(degenerate, fallback_dir[1], vy)
        norm = np.where(degenerate, 1.0, norm)
        return np.stack([vx / norm, vy / norm], axis=-1)

    dir1 = eigvec(k1, (1.0, 0.0))
    dir2 = eigvec(k2, (0.0, 1.0))

    for arr in (k1, k2):
        arr[~mask] = 0.0
    k_n = np.maximum(np.abs(k1), np.abs(k2))
    k_n[~mask] = 0.0
    return CurvatureMaps(
        k1=k1,
        k2=k2,
        mean=0.5 * (k1 + k2),
        k_n=k_n,
        dir1=dir1,
        dir2=dir2,
        mask=mask,
    )


def curvature_magnitude(maps: CurvatureMaps, kind: str = "normal") -> np.ndarray:
    """The curvature field fed to enhancement: normal-curvature magnitude by
    default, mean curvature magnitude as the alternative."""
    if kind == "normal":
        return maps.k_n
    if kind == "mean":
        return np.abs(maps.mean)
    raise ParameterError(f"unknown curvature kind {kind!r}")


def static_enhancement(
    k_vis: np.ndarray,
    k_nir: np.ndarray,
    th: float = DEFAULT_STATIC_TH,
) -> EnhancementMap:
    """Light-independent enhancement from per-pixel curvature differences,
    normalized by the summed curvature magnitudes."""
    k_vis = np.asarray(k_vis, dtype=np.float64)
    k_nir = np.asarray(k_nir, dtype=np.float64)
    if k_vis.shape != k_nir.shape:
        raise StructuralError("curvature fields must share dimensions")
    rho = np.where(k_nir > k_vis, np.abs(np.abs(k_vis) - np.abs(k_nir)), 0.0)
    rho = _threshold_keep(rho, th)
    eta = np.abs(k_vis) + np.abs(k_nir)
    c = np.zeros_like(rho)
    ok = eta > 0
    c[ok] = rho[ok] / eta[ok]
    return EnhancementMap(values=np.clip(c, 0.0, 1.0), kind="static", threshold=th)


def _band_center(band: Optional[Band], fallback: float) -> float:
    return band.center_nm if band is not None else fallback


def multiband_dynamic(
    n_vis: NormalMap,
    n_bands: list[NormalMap],
    l: LightDirection,
    r: int = DEFAULT_CONTRAST_RADIUS,
    th: float = DEFAULT_DYNAMIC_TH,
) -> EnhancementMap:
    """Narrow-band competition: per pixel the band with the highest
    modulation wins and supplies the contrast difference. Ties break toward
    the longest wavelength."""
    if not n_bands:
        raise ParameterError("need at least one near-infrared band")
    m_vis = michelson_contrast(lambertian_map(n_vis, l), r).values
    mods = np.stack(
        [michelson_contrast(lambertian_map(nb, l), r).values for nb in n_bands],
        axis=0,
    )
    centers = np.array(
        [_band_center(nb.band, float(i)) for i, nb in enumerate(n_bands)]
    )
    order = np.argsort(centers, kind="stable")  # ascending wavelength
    # scan in wavelength order, >= comparison hands ties to later (longer)
    winner = np.zeros(m_vis.shape, dtype=np.intp)
    best = np.full(m_vis.shape, -np.inf)
    for idx in order:
        take = mods[idx] >= best
        winner[take] = idx
        best[take] = mods[idx][take]

    phi = np.abs(m_vis - best)
    c = np.where(best > m_vis, _threshold_keep(phi, th), 0.0)
    return EnhancementMap(
        values=c, kind="dynamic", light=l, radius=r, threshold=th, winner=winner
    )


def multiband_static(
    k_vis: np.ndarray,
    k_bands: list[np.ndarray],
    th: float = DEFAULT_STATIC_TH,
    bands: Optional[list[Band]] = None,
) -> EnhancementMap:
    """Static variant of the narrow-band competition using curvature."""
    if not k_bands:
        raise ParameterError("need at least one near-infrared band")
    k_vis = np.asarray(k_vis, dtype=np.float64)
    stackk = np.stack([np.asarray(k, dtype=np.float64) for k in k_bands], axis=0)
    centers = np.array(
        [
            _band_center(bands[i] if bands else None, float(i))
            for i in range(len(k_bands))
        ]
    )
    order = np.argsort(centers, kind="stable")
    winner = np.zeros(k_vis.shape, dtype=np.intp)
    best = np.full(k_vis.shape, -np.inf)
    for idx in order:
        take = stackk[idx] >= best
        winner[take] = idx
        best[take] = stackk[idx][take]

    rho = np.where(best > k_vis, np.abs(np.abs(k_vis) - np.abs(best)), 0.0)
    rho = _threshold_keep(rho, th)
    eta = np.abs(k_vis) + np.abs(best)
    c = np.zeros_like(rho)
    ok = eta > 0
    c[ok] = rho[ok] / eta[ok]
    return EnhancementMap(
        values=np.clip(c, 0.0, 1.0), kind="static", threshold=th, winner=winner
    )
