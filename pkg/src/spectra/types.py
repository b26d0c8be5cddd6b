"""Core dataset types shared by every stage of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

UNIT_TOL = 1e-6
NORMAL_UNIT_TOL = 1e-4


class SpectraError(Exception):
    """Base class for all errors raised by this package."""


class LoadError(SpectraError):
    """A dataset file could not be located or decoded."""


class StructuralError(SpectraError):
    """Inputs violate a structural invariant (dimensions, index density)."""


class ParameterError(SpectraError):
    """A parameter is outside its documented domain."""


class ConfigurationError(SpectraError):
    """The dataset configuration cannot support the requested operation."""


class BandKind(str, Enum):
    VISIBLE_R = "visible-r"
    VISIBLE_G = "visible-g"
    VISIBLE_B = "visible-b"
    VISIBLE_COMBINED = "visible-combined"
    NIR = "nir"
    UV_EXCITATION = "uv-excitation"
    BISPECTRAL_EMISSION = "bispectral-emission"


@dataclass(frozen=True)
class Band:
    """One spectral band: a label, a wavelength range or center, and its kind."""

    label: str
    wavelength_nm: tuple[float, float]
    kind: BandKind

    def __post_init__(self):
        lo, hi = self.wavelength_nm
        if lo > hi:
            raise ParameterError(
                f"band {self.label!r}: wavelength low {lo} > high {hi}"
            )

    @classmethod
    def make(cls, label: str, wavelength_nm, kind) -> "Band":
        """Build a band from a scalar center or a (low, high) pair."""
        if isinstance(wavelength_nm, (int, float)):
            wl = (float(wavelength_nm), float(wavelength_nm))
        else:
            lo, hi = wavelength_nm
            wl = (float(lo), float(hi))
        return cls(label=label, wavelength_nm=wl, kind=BandKind(kind))

    @property
    def center_nm(self) -> float:
        return 0.5 * (self.wavelength_nm[0] + self.wavelength_nm[1])

    @property
    def is_visible(self) -> bool:
        return self.kind in (
            BandKind.VISIBLE_R,
            BandKind.VISIBLE_G,
            BandKind.VISIBLE_B,
            BandKind.VISIBLE_COMBINED,
        )


@dataclass(frozen=True)
class LightDirection:
    """Unit light direction in the camera frame, z toward the viewer."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        n = np.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if abs(n - 1.0) > UNIT_TOL:
            raise ParameterError(f"light direction not unit length: |l| = {n:.8f}")

    @classmethod
    def from_vector(cls, v, normalize: bool = False) -> "LightDirection":
        v = np.asarray(v, dtype=np.float64)
        if normalize:
            n = np.linalg.norm(v)
            if n == 0:
                raise ParameterError("cannot normalize zero light vector")
            v = v / n
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass
class SpectralStack:
    """All captured radiance images for one dataset.

    Images are keyed by (band label, light index, exposure index) and hold
    nonnegative float radiance, shape (H, W) or (H, W, 3).
    """

    width: int
    height: int
    images: dict[tuple[str, int, int], np.ndarray]
    bands: list[Band]
    lights: list[LightDirection]
    exposures: dict[str, list[float]]

    def __post_init__(self):
        for key, img in self.images.items():
            if img.shape[0] != self.height or img.shape[1] != self.width:
                raise StructuralError(
                    f"image {key} has shape {img.shape[:2]}, expected "
                    f"({self.height}, {self.width})"
                )
        for band in self.bands:
            for li in self.light_indices(band.label):
                if not any(
                    k[0] == band.label and k[1] == li for k in self.images
                ):
                    raise StructuralError(
                        f"band {band.label!r} light {li} has no exposures"
                    )

    def band(self, label: str) -> Band:
        for b in self.bands:
            if b.label == label:
                return b
        raise KeyError(f"unknown band {label!r}")

    def light_indices(self, band_label: str) -> list[int]:
        return sorted({k[1] for k in self.images if k[0] == band_label})

    def exposure_indices(self, band_label: str, light: int) -> list[int]:
        return sorted(
            k[2] for k in self.images if k[0] == band_label and k[1] == light
        )

    def image(self, band_label: str, light: int, ev: int = 0) -> np.ndarray:
        return self.images[(band_label, light, ev)]

    def light_matrix(self, band_label: str) -> np.ndarray:
        """(K, 3) array of light directions used by a band."""
        idx = self.light_indices(band_label)
        return np.stack([self.lights[i].as_array() for i in idx], axis=0)


@dataclass
class NormalMap:
    """Per-pixel unit normals for one material layer / band with validity mask."""

    normals: np.ndarray  # (H, W, 3)
    mask: np.ndarray  # (H, W) bool
    band: Optional[Band] = None
    albedo: Optional[np.ndarray] = None  # (H, W) nonnegative

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.normals.shape[:2] != self.mask.shape:
            raise StructuralError("normal/mask shape mismatch")

    @property
    def height(self) -> int:
        return self.normals.shape[0]

    @property
    def width(self) -> int:
        return self.normals.shape[1]

    def validate_unit_length(self, tol: float = NORMAL_UNIT_TOL) -> None:
        norms = np.linalg.norm(self.normals[self.mask], axis=-1)
        if norms.size and np.max(np.abs(norms - 1.0)) > tol:
            raise StructuralError(
                f"masked-in normals deviate from unit length by "
                f"{np.max(np.abs(norms - 1.0)):.2e}"
            )

    def copy(self) -> "NormalMap":
        return NormalMap(
            normals=self.normals.copy(),
            mask=self.mask.copy(),
            band=self.band,
            albedo=None if self.albedo is None else self.albedo.copy(),
        )


@dataclass
class PyramidLevel:
    """One smoothing level: per-band normals, the color image, and the kernel width."""

    normals: dict[str, NormalMap]
    color: Optional[np.ndarray]
    kernel_width_px: float
    sigma: float


@dataclass
class SmoothedPyramid:
    """Base layer plus progressively smoothed levels with normalized weights."""

    levels: list[PyramidLevel]
    weights: np.ndarray  # normalized kernel widths, sum to 1

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.levels) != len(self.weights):
            raise StructuralError("level/weight count mismatch")
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise StructuralError("pyramid weights must sum to 1")
        widths = [lv.kernel_width_px for lv in self.levels]
        if any(b <= a for a, b in zip(widths, widths[1:])):
            raise StructuralError("kernel widths must be strictly increasing")

    def __len__(self) -> int:
        return len(self.levels)


@dataclass
class Manifest:
    """Parsed dataset manifest: bands, light table, exposures and file map."""

    dataset: str
    bands: list[Band]
    lights: list[LightDirection]
    exposures: dict[str, list[float]]
    files: list[dict]  # {band, light, ev, path}
    attribution: str = ""
    root: str = "."

    def file_for(self, band: str, light: int, ev: int) -> Optional[str]:
        for f in self.files:
            if f["band"] == band and f["light"] == light and f["ev"] == ev:
                return f["path"]
        return None


def normalize_normals(normals: np.ndarray, mask: Optional[np.ndarray] = None,
                      eps: float = 1e-12) -> np.ndarray:
    """Renormalize a normal field to unit length; masked-out pixels untouched."""
    out = normals.copy()
    norms = np.linalg.norm(normals, axis=-1)
    ok = norms > eps
    if mask is not None:
        ok &= mask
    out[ok] = normals[ok] / norms[ok][..., None]
    return out
