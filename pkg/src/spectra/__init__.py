"""Multispectral photometric stereo and stylized rendering for layered
materials: per-band normal recovery, cross-band registration, near-infrared
enhancement maps, and the renderers built on them."""

__version__ = "0.1.0"

from .types import (
    Band,
    BandKind,
    LightDirection,
    Manifest,
    NormalMap,
    SmoothedPyramid,
    SpectralStack,
    SpectraError,
    LoadError,
    StructuralError,
    ParameterError,
    ConfigurationError,
)

__all__ = [
    "Band",
    "BandKind",
    "LightDirection",
    "Manifest",
    "NormalMap",
    "SmoothedPyramid",
    "SpectralStack",
    "SpectraError",
    "LoadError",
    "StructuralError",
    "ParameterError",
    "ConfigurationError",
]
