"""Stylized renderers: spectral band shading with four light strategies,
layered color compositing, multiscale curvature shading, three line types,
and the quantized near-infrared blend."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .enhancement import (
    CurvatureMaps,
    curvature_maps,
    lambertian_map,
    michelson_contrast,
)
from .filtering import joint_bilateral_filter
from .pyramid import SmoothedPyramid
from .types import LightDirection, NormalMap, ParameterError, StructuralError


def _default_light() -> LightDirection:
    v = np.array([-1.0, 1.0, 1.5])
    return LightDirection.from_vector(v, normalize=True)


@dataclass
class SbsParams:
    """Parameters of the spectral band shading renderer."""

    a: float = 35.0  # shape enhancement
    f: float = 0.0  # frequency term in [-1, 1]
    r: int = 13  # contrast window radius
    th: float = 0.1  # enhancement threshold
    strategy: str = "enhancement-map"
    l_global: LightDirection = field(default_factory=_default_light)
    blend: float = 0.0  # near-infrared background blend
    soft_toon: bool = True

    def __post_init__(self):
        if self.a <= 0:
            raise ParameterError(f"a must be > 0, got {self.a}")
        if not -1.0 <= self.f <= 1.0:
            raise ParameterError(f"f must lie in [-1, 1], got {self.f}")
        if not 0.0 <= self.blend <= 1.0:
            raise ParameterError(f"blend must lie in [0, 1], got {self.blend}")
        if self.strategy not in (
            "enhancement-map",
            "multilight",
            "focus",
            "static-principal",
        ):
            raise ParameterError(f"unknown light strategy {self.strategy!r}")


@dataclass
class LineParams:
    """Line extraction parameters; defaults follow the 3 / 7 / 80% recipe
    with 0.9 view and normal thresholds."""

    mean_radius: int = 3
    neighborhood: int = 7  # window width in pixels
    darker_fraction: float = 0.80
    view_threshold: float = 0.9
    normal_threshold: float = 0.9
    noise_floor: float = 1e-3
    view: tuple[float, float, float] = (0.0, 0.0, 1.0)
    # literal reading: mark where the majority of neighbors are darker
    # (maxima) instead of the minima-consistent default
    literal_darker_majority: bool = False

    def __post_init__(self):
        for name in ("darker_fraction", "view_threshold", "normal_threshold"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ParameterError(f"{name} must lie in (0, 1], got {v}")


@dataclass
class CurvatureShadeParams:
    q: float = 10.0  # user curvature scale; doubled on visible spectra
    curvature_kind: str = "signed"

    def __post_init__(self):
        if self.q <= 0:
            raise ParameterError(f"Q must be > 0, got {self.q}")


def smoothstep(t: np.ndarray) -> np.ndarray:
    """Soft toon transfer on [0, 1]; fixes 0, 1/2 and 1."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _shade_dot(normals: np.ndarray, light) -> np.ndarray:
    """Clamped dot product against a single light or a per-pixel field."""
    light = np.asarray(light, dtype=np.float64)
    if light.ndim == 1:
        dots = normals @ light
    else:
        if light.shape != normals.shape:
            raise StructuralError("per-pixel light field shape mismatch")
        dots = np.sum(normals * light, axis=-1)
    return np.clip(dots, 0.0, None)


def sbs_level(
    n_vis: NormalMap,
    n_nir: NormalMap,
    c_map: np.ndarray,
    a: float,
    l_vis,
    l_nir,
) -> np.ndarray:
    """Per-level shading contribution a*((1-C)(n_vis.l) + C(n_nir.l))."""
    d_vis = _shade_dot(n_vis.normals, l_vis)
    d_nir = _shade_dot(n_nir.normals, l_nir)
    d_vis[~n_vis.mask] = 0.0
    d_nir[~n_nir.mask] = 0.0
    return a * ((1.0 - c_map) * d_vis + c_map * d_nir)


def frequency_weights(weights: np.ndarray, f: float) -> np.ndarray:
    """Shift pyramid weight mass toward sharp (f=-1) or smooth (f=+1)
    levels by exponential reweighting, renormalized."""
    levels = len(weights)
    x = np.arange(levels, dtype=np.float64)
    shifted = weights * np.exp(f * (x - levels / 2.0))
    return shifted / shifted.sum()


def light_strategy(
    kind: str,
    pyramid: SmoothedPyramid,
    band_vis: str,
    band_nir: str,
    c_light: Optional[LightDirection] = None,
    l_global: Optional[LightDirection] = None,
    focus_region: Optional[np.ndarray] = None,
    focus_grid: tuple[int, int] = (16, 8),
    contrast_radius: int = 13,
    principal_elevation_deg: float = 45.0,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-level (l_vis, l_nir) light choices for spectral band shading.

    enhancement-map passes through the light that generated the
    enhancement maps; multilight projects the global light into the tangent
    plane of the next smoothed normal per pixel; focus searches a sampled
    hemisphere grid for the light maximizing mean near-infrared contrast
    inside the user region, averaged across levels; static-principal lifts
    per-pixel principal directions to 3-D at a fixed elevation.
    """
    levels = len(pyramid)
    if kind == "enhancement-map":
        if c_light is None:
            raise ParameterError("enhancement-map strategy needs the C light")
        vec = c_light.as_array()
        return [(vec, vec)] * levels

    if kind == "multilight":
        if l_global is None:
            raise ParameterError("multilight strategy needs l_global")
        g = l_global.as_array()
        out = []
        for x in range(levels):
            nxt = pyramid.levels[min(x + 1, levels - 1)]
            pair = []
            for band in (band_vis, band_nir):
                n = nxt.normals[band].normals
                proj = g - (n @ g)[..., None] * n
                norm = np.linalg.norm(proj, axis=-1)
                ok = norm > 1e-8
                fld = np.where(ok[..., None], proj / np.where(ok, norm, 1.0)[..., None], g)
                pair.append(fld)
            out.append(tuple(pair))
        return out

    if kind == "focus":
        if focus_region is None or not np.asarray(focus_region).any():
            raise ParameterError("focus strategy needs a nonempty focus region")
        region = np.asarray(focus_region, dtype=bool)
        best_score, best_vec = -np.inf, None
        for az_i in range(focus_grid[0]):
            for el_i in range(focus_grid[1]):
                az = 2.0 * np.pi * az_i / focus_grid[0]
                el = 0.5 * np.pi * (el_i + 0.5) / focus_grid[1]
                vec = np.array(
                    [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)]
                )
                light = LightDirection.from_vector(vec, normalize=True)
                score = 0.0
                for level in pyramid.levels:
                    chi = lambertian_map(level.normals[band_nir], light)
                    m = michelson_contrast(chi, contrast_radius).values
                    score += float(m[region].mean())
                score /= levels
                if score > best_score:
                    best_score, best_vec = score, light.as_array()
        return [(best_vec, best_vec)] * levels

    if kind == "static-principal":
        el = np.deg2rad(principal_elevation_deg)
        out = []
        for level in pyramid.levels:
            pair = []
            for band in (band_vis, band_nir):
                k = curvature_maps(level.normals[band])
                d = k.dir1
                fld = np.stack(
                    [d[..., 0] * np.cos(el), d[..., 1] * np.cos(el),
                     np.full(d.shape[:2], np.sin(el))],
                    axis=-1,
                )
                fld /= np.linalg.norm(fld, axis=-1, keepdims=True)
                pair.append(fld)
            out.append(tuple(pair))
        return out

    raise ParameterError(f"unknown light strategy {kind!r}")


def sbs_render(
    pyramid: SmoothedPyramid,
    c_per_level: list[np.ndarray],
    params: SbsParams,
    lights_per_level: list[tuple[np.ndarray, np.ndarray]],
    band_vis: str = "vis",
    band_nir: str = "nir720",
) -> np.ndarray:
    """Spectral band shading: per-level contributions combined vertically
    with frequency-reweighted normalized kernel widths, mapped through
    1/2 + 1/2 * sum and the soft toon transfer; output lies in [0, 1]."""
    if len(c_per_level) != len(pyramid):
        raise StructuralError("need one enhancement map per pyramid level")
    if len(lights_per_level) != len(pyramid):
        raise StructuralError("need one light pair per pyramid level")

    omega = frequency_weights(pyramid.weights, params.f)
    acc = None
    for x, level in enumerate(pyramid.levels):
        l_vis, l_nir = lights_per_level[x]
        e = sbs_level(
            level.normals[band_vis],
            level.normals[band_nir],
            c_per_level[x],
            params.a,
            l_vis,
            l_nir,
        )
        acc = omega[x] * e if acc is None else acc + omega[x] * e

    out = np.clip(0.5 + 0.5 * acc, 0.0, 1.0)
    return smoothstep(out) if params.soft_toon else out


def layered_color_render(
    background_shading: np.ndarray,
    vis_color: np.ndarray,
    nir_intensity: np.ndarray,
    c_per_band: list[np.ndarray],
    palette: list[tuple[float, float, float]],
    blend: float = 0.0,
) -> np.ndarray:
    """Layered rendering: a blend-interpolated visible/near-infrared
    background shaded by spectral band shading, with each wavelength's
    palette color composited on top using its enhancement weights as
    alpha."""
    if len(palette) != len(c_per_band):
        raise ParameterError(
            f"palette size {len(palette)} != band count {len(c_per_band)}"
        )
    if not 0.0 <= blend <= 1.0:
        raise ParameterError(f"blend must lie in [0, 1], got {blend}")

    vis_color = np.asarray(vis_color, dtype=np.float64)
    nir_rgb = np.repeat(np.asarray(nir_intensity, dtype=np.float64)[..., None],
                        3, axis=-1)
    base = (1.0 - blend) * vis_color + blend * nir_rgb
    out = base * background_shading[..., None]
    for c_map, color in zip(c_per_band, palette):
        alpha = np.clip(c_map, 0.0, 1.0)[..., None]
        out = (1.0 - alpha) * out + alpha * np.asarray(color, dtype=np.float64)
    return np.clip(out, 0.0, 1.0)


def signed_curvature(maps: CurvatureMaps) -> np.ndarray:
    """Signed curvature of the dominant principal direction: positive on
    ridges, negative in valleys."""
    return np.where(np.abs(maps.k1) >= np.abs(maps.k2), maps.k1, maps.k2)


def curvature_shade(
    k_vis_per_level: list[np.ndarray],
    k_nir_per_level: list[np.ndarray],
    c_per_level: list[np.ndarray],
    q: float,
    level_weights: np.ndarray,
) -> np.ndarray:
    """Curvature shading: scaled signed curvature replaces the diffuse term,
    brightening ridges and darkening valleys around mid-gray. Visible
    curvature uses 2Q, near-infrared uses Q; spectra mix by the enhancement
    weights and levels combine by the (normalized) kernel-width weights."""
    if q <= 0:
        raise ParameterError(f"Q must be > 0, got {q}")
    if not (len(k_vis_per_level) == len(k_nir_per_level) == len(c_per_level)):
        raise StructuralError("per-level field counts differ")
    w = np.asarray(level_weights, dtype=np.float64)
    w = w / w.sum()

    acc = np.zeros_like(np.asarray(k_vis_per_level[0], dtype=np.float64))
    for x, (k_vis, k_nir, c_map) in enumerate(
        zip(k_vis_per_level, k_nir_per_level, c_per_level)
    ):
        s_vis = np.clip(2.0 * q * k_vis, -1.0, 1.0)
        s_nir = np.clip(q * k_nir, -1.0, 1.0)
        acc += w[x] * ((1.0 - c_map) * s_vis + c_map * s_nir)
    return np.clip(0.5 + 0.5 * acc, 0.0, 1.0)


# --------------------------------------------------------------------------
# Line extraction
# --------------------------------------------------------------------------

def _masked_mean_filter(values: np.ndarray, mask: np.ndarray, radius: int):
    size = 2 * radius + 1
    m = mask.astype(np.float64)
    num = ndimage.uniform_filter(values * m, size=size, mode="constant")
    den = ndimage.uniform_filter(m, size=size, mode="constant")
    out = np.zeros_like(values)
    ok = den > 1e-12
    out[ok] = num[ok] / den[ok]
    return out


def suggestive_contours(n: NormalMap, params: LineParams | None = None) -> np.ndarray:
    """Lines at local minima of the mean-filtered head-lit image n . v:
    a pixel is marked when at least the configured fraction of its
    masked-in neighbors is strictly brighter. The literal majority-darker
    reading (marking maxima) sits behind params.literal_darker_majority."""
    params = params or LineParams()
    v = np.asarray(params.view, dtype=np.float64)
    head = np.clip(n.normals @ v, 0.0, None)
    head[~n.mask] = 0.0
    smooth = _masked_mean_filter(head, n.mask, params.mean_radius)

    half = params.neighborhood // 2
    h, w = smooth.shape
    count = np.zeros((h, w))
    valid = np.zeros((h, w))
    for dy in range(-half, half + 1):
        for dx in range(-half, half + 1):
            if dy == 0 and dx == 0:
                continue
            ys0, ys1 = max(0, -dy), min(h, h - dy)
            xs0, xs1 = max(0, -dx), min(w, w - dx)
            dst = (slice(ys0, ys1), slice(xs0, xs1))
            src = (slice(ys0 + dy, ys1 + dy), slice(xs0 + dx, xs1 + dx))
            ok = n.mask[src]
            if params.literal_darker_majority:
                count[dst] += ok & (smooth[src] < smooth[dst])
            else:
                count[dst] += ok & (smooth[src] > smooth[dst])
            valid[dst] += ok

    frac = np.zeros_like(count)
    ok = valid > 0
    frac[ok] = count[ok] / valid[ok]
    return (frac >= params.darker_fraction) & n.mask & ok


def discontinuity_lines(n: NormalMap, params: LineParams | None = None) -> np.ndarray:
    """Lines where any 4-neighbor's normal orientation differs strongly and
    the normal is not perpendicular to the view (n . v above
    1 - view_threshold)."""
    params = params or LineParams()
    v = np.asarray(params.view, dtype=np.float64)
    h, w = n.mask.shape
    min_dot = np.full((h, w), np.inf)
    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ys0, ys1 = max(0, -dy), min(h, h - dy)
        xs0, xs1 = max(0, -dx), min(w, w - dx)
        dst = (slice(ys0, ys1), slice(xs0, xs1))
        src = (slice(ys0 + dy, ys1 + dy), slice(xs0 + dx, xs1 + dx))
        dot = np.sum(n.normals[src] * n.normals[dst], axis=-1)
        dot = np.where(n.mask[src], dot, np.inf)
        min_dot[dst] = np.minimum(min_dot[dst], dot)

    facing = (n.normals @ v) > (1.0 - params.view_threshold)
    return (min_dot < params.normal_threshold) & facing & n.mask


def principal_curvature_lines(
    k: CurvatureMaps, params: LineParams | None = None
) -> np.ndarray:
    """Directional non-maximum suppression of |k| along the dominant
    principal direction, above a noise floor."""
    params = params or LineParams()
    mag = k.k_n
    use1 = np.abs(k.k1) >= np.abs(k.k2)
    direction = np.where(use1[..., None], k.dir1, k.dir2)

    h, w = mag.shape
    gy, gx = np.mgrid[0:h, 0:w].astype(np.float64)
    fx = gx + direction[..., 0]
    fy = gy + direction[..., 1]
    bx = gx - direction[..., 0]
    by = gy - direction[..., 1]
    fwd = ndimage.map_coordinates(mag, [fy, fx], order=1, mode="nearest")
    bwd = ndimage.map_coordinates(mag, [by, bx], order=1, mode="nearest")

    return (mag >= fwd) & (mag >= bwd) & (mag > params.noise_floor) & k.mask


# --------------------------------------------------------------------------
# Near-infrared blend / toon
# --------------------------------------------------------------------------

def kmeans_1d(values: np.ndarray, k: int, iterations: int = 50):
    """Deterministic 1-D k-means with quantile seeding.

    Returns (centers, quantized) where quantized maps each value to its
    cluster center. k is reduced with a warning when the data has fewer
    distinct values."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    flat = np.asarray(values, dtype=np.float64).ravel()
    distinct = np.unique(flat)
    if len(distinct) < k:
        warnings.warn(
            f"reducing k from {k} to {len(distinct)} distinct values",
            stacklevel=2,
        )
        k = len(distinct)

    centers = np.quantile(flat, (np.arange(k) + 0.5) / k)
    centers = np.unique(centers)
    for _ in range(iterations):
        assign = np.argmin(np.abs(flat[:, None] - centers[None, :]), axis=1)
        new = centers.copy()
        for c in range(len(centers)):
            sel = assign == c
            if sel.any():
                new[c] = flat[sel].mean()
        if np.allclose(new, centers, atol=1e-12):
            centers = new
            break
        centers = new

    assign = np.argmin(np.abs(flat[:, None] - centers[None, :]), axis=1)
    quantized = centers[assign].reshape(np.asarray(values).shape)
    return centers, quantized


def nir_blend_toon(
    vis_color: np.ndarray,
    n_vis: NormalMap,
    nir_image: np.ndarray,
    k: int,
    blend_color: tuple[float, float, float],
    l: LightDirection,
    filter_passes: int = 3,
    filter_window: int = 3,
) -> np.ndarray:
    """Painterly near-infrared blend: joint-bilateral-filtered color and
    normals drive Lambertian shading, and the k-means-quantized
    near-infrared image tints each channel by the blend color."""
    if k < 2:
        raise ParameterError(f"k must be >= 2, got {k}")
    color, normals = joint_bilateral_filter(
        vis_color, n_vis, passes=filter_passes, window_px=filter_window
    )
    shade = np.clip(normals.normals @ l.as_array(), 0.0, None)
    shade[~normals.mask] = 0.0
    if color.ndim == 2:
        color = np.repeat(color[..., None], 3, axis=-1)
    shaded = color * shade[..., None]

    _, quantized = kmeans_1d(nir_image, k)
    tint = np.asarray(blend_color, dtype=np.float64)
    out = shaded + tint[None, None, :] * quantized[..., None]
    return np.clip(out, 0.0, 1.0)
