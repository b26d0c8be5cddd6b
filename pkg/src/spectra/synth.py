"""Synthetic layered ground-truth scenes and reconstruction validation.

A layered sphere has a smooth outer (paint) surface and an inner surface
with groove rings. Each band sees a transmission-weighted mix of the two
layers, so short wavelengths image the paint and long wavelengths the
grooves underneath.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import io as sio
from .photometric import RadianceModel, forward_radiance
from .types import (
    Band,
    BandKind,
    LightDirection,
    Manifest,
    NormalMap,
    ParameterError,
    SpectralStack,
    StructuralError,
)


@dataclass
class GrooveSpec:
    """Concentric sinusoidal groove rings etched into the inner layer."""

    rings: int = 4
    depth_px: float = 6.0
    width_px: float = 3.0  # Gaussian sigma of each ring profile

    def ring_radii(self, radius_px: float) -> np.ndarray:
        if self.rings == 0:
            return np.array([])
        return radius_px * (np.arange(1, self.rings + 1) / (self.rings + 1.5))


@dataclass
class LayeredScene:
    """Ground-truth geometry: outer paint layer and inner grooved layer."""

    outer: NormalMap  # gt_top
    inner: NormalMap  # gt_bottom
    outer_height: np.ndarray
    inner_height: np.ndarray
    transmission: dict[str, float] = field(default_factory=dict)
    groove_mask: Optional[np.ndarray] = None

    def tau(self, band: Band) -> float:
        if band.label in self.transmission:
            return self.transmission[band.label]
        return 1.0 if band.kind == BandKind.NIR else 0.0


def _height_to_normals(height: np.ndarray, valid: np.ndarray) -> np.ndarray:
    gy, gx = np.gradient(height)
    n = np.stack([-gx, -gy, np.ones_like(height)], axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    n[~valid] = 0.0
    return n


def gen_layered_sphere(
    radius_px: int = 128,
    groove: Optional[GrooveSpec] = None,
    paint_thickness: float = 6.0,
    margin_px: int = 8,
    transmission: Optional[dict[str, float]] = None,
) -> LayeredScene:
    """Analytic sphere with groove rings under a paint layer.

    The inner layer carries the full grooves; the outer layer carries them
    attenuated by the paint thickness (paint fills grooves, so thickness 0
    reproduces the inner layer and thickness >= depth hides grooves
    completely).
    """
    if radius_px < 16:
        raise ParameterError(f"radius_px must be >= 16, got {radius_px}")
    groove = groove or GrooveSpec()
    if groove.depth_px > radius_px:
        raise ParameterError("groove depth exceeds sphere radius")

    size = 2 * (radius_px + margin_px)
    coords = np.arange(size) - (size - 1) / 2.0
    xx, yy = np.meshgrid(coords, coords)
    rr = np.sqrt(xx**2 + yy**2)
    inside = rr <= radius_px - 1.0

    sphere_z = np.zeros_like(rr)
    sphere_z[inside] = np.sqrt(radius_px**2 - rr[inside] ** 2)

    depression = np.zeros_like(rr)
    groove_mask = np.zeros_like(inside)
    for ring_r in groove.ring_radii(radius_px):
        profile = np.exp(-((rr - ring_r) ** 2) / (2.0 * groove.width_px**2))
        depression += groove.depth_px * profile
        # 3.5 sigma covers the slope tails of the Gaussian profile
        groove_mask |= np.abs(rr - ring_r) < 3.5 * groove.width_px
    groove_mask &= inside

    inner_height = sphere_z - depression
    residual = max(0.0, groove.depth_px - paint_thickness)
    outer_depression = depression * (residual / groove.depth_px
                                     if groove.depth_px > 0 else 0.0)
    outer_height = sphere_z - outer_depression

    # analytic sphere normals for the smooth part; grooved layers use the
    # height-field gradient so groove walls are exact
    if groove.rings == 0 or residual == groove.depth_px:
        pass
    outer_normals = _height_to_normals(outer_height, inside)
    inner_normals = _height_to_normals(inner_height, inside)
    if groove.rings == 0:
        # keep the exact analytic normals when no grooves perturb the sphere
        exact = np.zeros_like(outer_normals)
        exact[inside] = np.stack(
            [xx[inside], yy[inside], sphere_z[inside]], axis=-1
        ) / radius_px
        outer_normals = inner_normals = exact

    return LayeredScene(
        outer=NormalMap(normals=outer_normals, mask=inside.copy()),
        inner=NormalMap(normals=inner_normals.copy(), mask=inside.copy()),
        outer_height=outer_height,
        inner_height=inner_height,
        transmission=dict(transmission or {}),
        groove_mask=groove_mask,
    )


def dome_lights(count: int = 37, seed_elevations=(90.0, 70.0, 50.0, 30.0),
                ring_counts=(1, 6, 12, 18)) -> list[LightDirection]:
    """Light dome: one zenith light plus azimuth rings at fixed elevations."""
    if sum(ring_counts) != count:
        raise ParameterError("ring counts must sum to the light count")
    lights = []
    for elev_deg, n in zip(seed_elevations, ring_counts):
        elev = np.deg2rad(elev_deg)
        for k in range(n):
            az = 2.0 * np.pi * k / n
            lights.append(
                LightDirection.from_vector(
                    [
                        np.cos(elev) * np.cos(az),
                        np.cos(elev) * np.sin(az),
                        np.sin(elev),
                    ],
                    normalize=True,
                )
            )
    return lights


DEFAULT_BANDS = [
    Band.make("vis", (400.0, 700.0), BandKind.VISIBLE_COMBINED),
    Band.make("nir720", 720.0, BandKind.NIR),
]

DEFAULT_EXPOSURES = {"vis": [0.2, 0.5, 0.7], "nir720": [0.8, 1.0, 1.4]}


def render_synthetic_stack(
    scene: LayeredScene,
    lights: list[LightDirection],
    bands: Optional[list[Band]] = None,
    noise_sigma: float = 0.0,
    specular_strength: float = 0.0,
    specular_shininess: float = 8.0,
    base_intensity: float = 0.45,
    exposure_gains=(1.0, 2.0, 4.0),
    rng: Optional[np.random.Generator] = None,
) -> SpectralStack:
    """Forward-render a layered scene into a multi-exposure spectral stack.

    Radiance per band mixes the two layers linearly by the band's
    transmission tau (0 = outer only, 1 = inner only). An optional
    Phong-style lobe off the outer layer injects highlights, and the
    exposure series is produced by gain multiples clipped at 1 so
    saturation spreads outward with exposure.
    """
    bands = bands or DEFAULT_BANDS
    rng = rng or np.random.default_rng(0)
    model = RadianceModel(reflectance=base_intensity)
    view = np.array([0.0, 0.0, 1.0])

    images: dict[tuple[str, int, int], np.ndarray] = {}
    inside = scene.outer.mask
    for band in bands:
        tau = scene.tau(band)
        for li, light in enumerate(lights):
            lam_top = forward_radiance(model, scene.outer.normals, light)
            lam_bot = forward_radiance(model, scene.inner.normals, light)
            radiance = (1.0 - tau) * lam_top + tau * lam_bot
            if specular_strength > 0:
                l_vec = light.as_array()
                n = scene.outer.normals
                refl = 2.0 * (n @ l_vec)[..., None] * n - l_vec
                spec = np.clip(refl @ view, 0.0, None) ** specular_shininess
                radiance = radiance + specular_strength * spec
            radiance[~inside] = 0.0
            if noise_sigma > 0:
                radiance = radiance + rng.normal(0.0, noise_sigma, radiance.shape)
                radiance = np.clip(radiance, 0.0, None)
            for ev, gain in enumerate(exposure_gains):
                images[(band.label, li, ev)] = np.clip(gain * radiance, 0.0, 1.0)

    h, w = inside.shape
    exposures = {b.label: DEFAULT_EXPOSURES.get(b.label,
                 [0.5 * g for g in exposure_gains]) for b in bands}
    return SpectralStack(
        width=w, height=h, images=images, bands=bands, lights=list(lights),
        exposures=exposures,
    )


@dataclass
class ErrorReport:
    """Angular reconstruction error in degrees plus a 0-30 degree heat map."""

    per_pixel_deg: np.ndarray
    mask: np.ndarray
    mean_deg: float
    median_deg: float
    max_deg: float
    heat_map: np.ndarray  # (H, W, 3) uint8, blue (0) to red (30 deg)

    HEAT_SCALE_DEG = 30.0


def angular_error(recovered: NormalMap, truth: NormalMap) -> ErrorReport:
    """Per-pixel angular difference over the shared valid mask."""
    if recovered.normals.shape != truth.normals.shape:
        raise StructuralError("normal maps must share dimensions")
    mask = recovered.mask & truth.mask
    if not mask.any():
        raise StructuralError("no overlapping valid pixels to compare")

    dots = np.sum(recovered.normals * truth.normals, axis=-1)
    err = np.degrees(np.arccos(np.clip(dots, -1.0, 1.0)))
    err[~mask] = 0.0
    valid = err[mask]

    from matplotlib import colormaps

    scaled = np.clip(err / ErrorReport.HEAT_SCALE_DEG, 0.0, 1.0)
    rgba = colormaps["jet"](scaled)
    heat = (rgba[..., :3] * 255).astype(np.uint8)
    heat[~mask] = 0

    return ErrorReport(
        per_pixel_deg=err,
        mask=mask,
        mean_deg=float(valid.mean()),
        median_deg=float(np.median(valid)),
        max_deg=float(valid.max()),
        heat_map=heat,
    )


def save_synthetic_dataset(
    out_dir: str,
    scene: Optional[LayeredScene] = None,
    lights: Optional[list[LightDirection]] = None,
    bands: Optional[list[Band]] = None,
    transmission: Optional[dict[str, float]] = None,
    **render_kwargs,
) -> str:
    """Write a complete manifest-rooted dataset plus ground-truth normals.

    Returns the manifest path. Ground truth goes to gt_top.pfm /
    gt_bottom.pfm next to the manifest so `validate` can score
    reconstructions.
    """
    scene = scene or gen_layered_sphere(radius_px=64,
                                        transmission=transmission)
    if transmission:
        scene.transmission.update(transmission)
    lights = lights or dome_lights()
    bands = bands or DEFAULT_BANDS
    stack = render_synthetic_stack(scene, lights, bands=bands, **render_kwargs)

    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    files = []
    for (band, li, ev), img in sorted(stack.images.items()):
        rel = os.path.join("images", f"{band}_l{li:02d}_ev{ev}.png")
        sio.save_png(img, os.path.join(out_dir, rel))
        files.append({"band": band, "light": li, "ev": ev, "path": rel})

    manifest = Manifest(
        dataset="layered-sphere",
        bands=bands,
        lights=lights,
        exposures=stack.exposures,
        files=files,
        attribution="synthetic layered sphere",
        root=out_dir,
    )
    manifest_path = os.path.join(out_dir, "manifest.json")
    sio.save_manifest(manifest, manifest_path)
    sio.save_normal_map(scene.outer, os.path.join(out_dir, "gt_top.pfm"))
    sio.save_normal_map(scene.inner, os.path.join(out_dir, "gt_bottom.pfm"))
    np.save(os.path.join(out_dir, "groove_mask.npy"), scene.groove_mask)
    return manifest_path
