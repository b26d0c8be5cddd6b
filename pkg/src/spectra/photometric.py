"""Per-band normal recovery: radiance model, highlight rejection,
specular-free diffuse extraction, least-squares stereo, and bispectral
combination."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .color import luminance
from .spectral import DEFAULT_TH_EV, CoherenceReport, coherence_mask
from .types import (
    Band,
    ConfigurationError,
    LightDirection,
    NormalMap,
    ParameterError,
    SpectralStack,
    StructuralError,
)

SHADOW_FLOOR = 0.01
TIKHONOV_DAMPING = 1e-8
LOG_EPS = 1e-6
DEFAULT_Y_TH = 0.25


@dataclass(frozen=True)
class RadianceModel:
    """Scalar radiance factors: camera sensitivity, light spectrum, reflectance."""

    sensitivity: float = 1.0  # D
    light_spectrum: float = 1.0  # L
    reflectance: float = 1.0  # rho

    def __post_init__(self):
        if self.sensitivity <= 0 or self.light_spectrum <= 0:
            raise ParameterError("sensitivity and light spectrum must be > 0")
        if self.reflectance < 0:
            raise ParameterError("reflectance must be >= 0")


def forward_radiance(model: RadianceModel, n, l) -> np.ndarray:
    """Observed radiance D * rho * L * max(n . l, 0); the clamp models
    attached shadow. Accepts a single normal or an (..., 3) field."""
    n = np.asarray(n, dtype=np.float64)
    l_vec = l.as_array() if isinstance(l, LightDirection) else np.asarray(l)
    dot = np.clip(n @ l_vec, 0.0, None)
    return model.sensitivity * model.reflectance * model.light_spectrum * dot


@dataclass
class HighlightMask:
    """Per-(band, light) boolean masks; True marks contaminated pixels."""

    masks: dict[tuple[str, int], np.ndarray]

    def mask_for(self, band: str, light: int, shape) -> np.ndarray:
        m = self.masks.get((band, light))
        if m is None:
            return np.zeros(shape, dtype=bool)
        if m.shape != tuple(shape):
            raise StructuralError(
                f"highlight mask for ({band}, {light}) has shape {m.shape}, "
                f"expected {tuple(shape)}"
            )
        return m

    @classmethod
    def empty(cls) -> "HighlightMask":
        return cls(masks={})


def specular_free(s_o: np.ndarray, s_highlighted: np.ndarray,
                  iterations: int = 5) -> np.ndarray:
    """Diffuse estimate of a highlighted image given a highlight-free image
    at the same tilt angle.

    Logarithmic differentiation against s_o with positive-part clamping
    yields the difference-based specular-free image (pointwise
    min(s_highlighted, s_o)); each subsequent iteration shifts remaining
    local brightness maxima down to their brightest neighbor. The global
    maximum never increases and the output never exceeds the input.
    """
    s_o = np.asarray(s_o, dtype=np.float64)
    s_h = np.asarray(s_highlighted, dtype=np.float64)
    if s_o.shape != s_h.shape:
        raise StructuralError("images must share dimensions")
    if iterations < 0:
        raise ParameterError("iterations must be >= 0")

    log_ratio = np.log(s_h + LOG_EPS) - np.log(s_o + LOG_EPS)
    diffuse = np.exp(np.log(s_h + LOG_EPS) - np.clip(log_ratio, 0.0, None)) - LOG_EPS
    diffuse = np.clip(diffuse, 0.0, None)
    highlight_region = log_ratio > 1e-9

    shape = (3, 3) if diffuse.ndim == 2 else (3, 3, 1)
    punched = np.ones(shape, dtype=bool)
    punched[tuple(s // 2 for s in shape)] = False
    for _ in range(iterations):
        # brightest neighbor excluding self; only highlight pixels shift
        others_max = ndimage.maximum_filter(diffuse, footprint=punched,
                                            mode="nearest")
        peaks = highlight_region & (diffuse > others_max)
        if not peaks.any():
            break
        diffuse = np.where(peaks, others_max, diffuse)
    return diffuse


def exposure_coherence(
    stack: SpectralStack, band: Band, light: int, th_ev: float = DEFAULT_TH_EV
) -> CoherenceReport:
    """Coherence report for one (band, light) exposure series."""
    evs = stack.exposure_indices(band.label, light)
    images = [luminance(stack.image(band.label, light, ev)) for ev in evs]
    return coherence_mask(images, th_ev=th_ev)


def detect_highlights(
    stack: SpectralStack,
    band: Band,
    th_ev: float = DEFAULT_TH_EV,
    suspicion_threshold: float = 0.5,
    sf_threshold: float = 0.02,
    refine_iterations: int = 3,
    refine_threshold: float = 0.005,
) -> HighlightMask:
    """Per-light highlight masks combining exposure coherence with
    specular-free differencing.

    The first pass uses the capture under the nearest-elevation light (same
    tilt angle, different azimuth) as the highlight-free reference, so the
    highlight sits elsewhere in the frame. Refinement passes solve for
    normals under the current mask and use each light's predicted diffuse
    image as its reference, which tightens the mask onto the remaining
    specular residue.
    """
    lights = stack.light_indices(band.label)
    directions = {i: stack.lights[i].as_array() for i in lights}
    masks: dict[tuple[str, int], np.ndarray] = {}
    for li in lights:
        img = luminance(stack.image(band.label, li, 0))
        combined = np.zeros(img.shape, dtype=bool)

        if len(stack.exposure_indices(band.label, li)) >= 2:
            report = exposure_coherence(stack, band, li, th_ev=th_ev)
            combined |= report.suspicion > suspicion_threshold

        ref = _same_tilt_reference(li, directions)
        if ref is not None:
            s_o = luminance(stack.image(band.label, ref, 0))
            diffuse = specular_free(s_o, img, iterations=0)
            combined |= (img - diffuse) > sf_threshold

        masks[(band.label, li)] = combined

    result = HighlightMask(masks=masks)
    for _ in range(refine_iterations):
        recovered = solve_normals(stack, band, highlight=result)
        refined: dict[tuple[str, int], np.ndarray] = {}
        for li in lights:
            img = luminance(stack.image(band.label, li, 0))
            pred = recovered.albedo * np.clip(
                recovered.normals @ directions[li], 0.0, None
            )
            pred[~recovered.mask] = 0.0
            diffuse = specular_free(pred, img, iterations=0)
            refined[(band.label, li)] = (img - diffuse) > refine_threshold
        result = HighlightMask(masks=refined)
    return result


def _same_tilt_reference(light: int, directions: dict[int, np.ndarray]) -> Optional[int]:
    z = directions[light][2]
    best, best_dz = None, np.inf
    for other, vec in directions.items():
        if other == light:
            continue
        dz = abs(vec[2] - z)
        if dz < best_dz:
            best, best_dz = other, dz
    return best


def solve_normals(
    stack: SpectralStack,
    band: Band,
    highlight: Optional[HighlightMask] = None,
    shadow_floor: float = SHADOW_FLOOR,
) -> NormalMap:
    """Per-pixel least-squares photometric stereo for one band.

    Only EV0 images enter the system; pixels below the shadow floor at a
    light, or flagged by the highlight mask, drop that light's equation.
    Pixels left with fewer than 3 usable lights are masked out. The
    unnormalized solution length is the albedo.
    """
    if highlight is None:
        highlight = HighlightMask.empty()
    light_idx = stack.light_indices(band.label)
    if len(light_idx) < 3:
        raise ConfigurationError(
            f"band {band.label!r} has {len(light_idx)} lights; need >= 3"
        )
    lights = np.stack([stack.lights[i].as_array() for i in light_idx], axis=0)
    if np.linalg.matrix_rank(lights) < 3:
        raise ConfigurationError(
            f"light set for band {band.label!r} is rank-deficient"
        )

    shape = (stack.height, stack.width)
    intensities = np.stack(
        [luminance(stack.image(band.label, i, 0)) for i in light_idx], axis=0
    )
    usable = intensities >= shadow_floor
    for k, i in enumerate(light_idx):
        usable[k] &= ~highlight.mask_for(band.label, i, shape)

    u = usable.astype(np.float64)
    # per-pixel normal equations: A n = b with Tikhonov damping
    a = np.einsum("khw,ka,kb->hwab", u, lights, lights)
    b = np.einsum("khw,khw,ka->hwa", u, intensities, lights)
    a += TIKHONOV_DAMPING * np.eye(3)

    solution = np.linalg.solve(a, b[..., None])[..., 0]
    albedo = np.linalg.norm(solution, axis=-1)
    count = usable.sum(axis=0)
    mask = (count >= 3) & (albedo > 1e-12)

    normals = np.zeros(shape + (3,), dtype=np.float64)
    normals[mask] = solution[mask] / albedo[mask][..., None]
    albedo = np.where(mask, albedo, 0.0)
    return NormalMap(normals=normals, mask=mask, band=band, albedo=albedo)


def combine_bispectral(
    n_vis: NormalMap,
    n_bis: NormalMap,
    emission: np.ndarray,
    y_th: float = DEFAULT_Y_TH,
) -> NormalMap:
    """Replace visible normals with bispectral ones at fluorescing pixels
    (emission luminance above y_th where the bispectral map is valid)."""
    if n_vis.normals.shape != n_bis.normals.shape:
        raise StructuralError("normal maps must share dimensions")
    emit = luminance(emission)
    if emit.shape != n_vis.mask.shape:
        raise StructuralError("emission image dimensions differ from normals")

    use_bis = (emit > y_th) & n_bis.mask
    normals = np.where(use_bis[..., None], n_bis.normals, n_vis.normals)
    mask = np.where(use_bis, n_bis.mask, n_vis.mask)
    albedo = None
    if n_vis.albedo is not None and n_bis.albedo is not None:
        albedo = np.where(use_bis, n_bis.albedo, n_vis.albedo)
    return NormalMap(normals=normals, mask=mask, band=n_vis.band, albedo=albedo)
