"""Dataset registry backing the CLI and the render service.

Datasets live in subdirectories of a root (SPECTRA_DATA_DIR by default),
each holding a manifest.json. Derived products (stacks, normals, pyramids,
enhancement maps) are memoized under content-addressed keys; cache lookups
are thread-safe and population is atomic per key, and disabling the cache
must never change any output."""

from __future__ import annotations

import hashlib
import json
import os
import threading
from typing import Any, Callable, Optional

from . import io as sio
from .enhancement import (
    curvature_magnitude,
    curvature_maps,
    dynamic_enhancement,
    static_enhancement,
)
from .photometric import detect_highlights, solve_normals
from .pyramid import build_pyramid
from .types import LightDirection, NormalMap, SpectraError, SpectralStack

ENV_DATA_DIR = "SPECTRA_DATA_DIR"


class UnknownDatasetError(SpectraError):
    pass


def _param_key(*parts: Any) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:24]


class DatasetRegistry:
    def __init__(self, root: Optional[str] = None, cache_enabled: bool = True):
        self.root = root or os.environ.get(ENV_DATA_DIR, ".")
        self.cache_enabled = cache_enabled
        self._cache: dict[str, Any] = {}
        self._lock = threading.Lock()

    # -- discovery ---------------------------------------------------------

    def dataset_ids(self) -> list[str]:
        if not os.path.isdir(self.root):
            return []
        out = []
        for name in sorted(os.listdir(self.root)):
            if os.path.isfile(os.path.join(self.root, name, "manifest.json")):
                out.append(name)
        return out

    def manifest_path(self, dataset_id: str) -> str:
        path = os.path.join(self.root, dataset_id, "manifest.json")
        if not os.path.isfile(path):
            raise UnknownDatasetError(f"unknown dataset {dataset_id!r}")
        return path

    def describe(self, dataset_id: str) -> dict:
        manifest = sio.load_manifest(self.manifest_path(dataset_id))
        return {
            "id": dataset_id,
            "dataset": manifest.dataset,
            "attribution": manifest.attribution,
            "bands": [
                {
                    "label": b.label,
                    "kind": b.kind.value,
                    "wavelength_nm": list(b.wavelength_nm),
                }
                for b in manifest.bands
            ],
            "lights": [[l.x, l.y, l.z] for l in manifest.lights],
            "exposures": manifest.exposures,
            "image_count": len(manifest.files),
        }

    def list_datasets(self) -> list[dict]:
        return [self.describe(d) for d in self.dataset_ids()]

    # -- caching -----------------------------------------------------------

    def _memo(self, key: str, compute: Callable[[], Any]) -> Any:
        if not self.cache_enabled:
            return compute()
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = compute()
        with self._lock:
            # atomic insert; first writer wins so concurrent readers agree
            return self._cache.setdefault(key, value)

    def invalidate(self, dataset_id: Optional[str] = None) -> None:
        with self._lock:
            if dataset_id is None:
                self._cache.clear()
            else:
                doomed = [k for k in self._cache if k.startswith(dataset_id + ":")]
                for k in doomed:
                    del self._cache[k]

    # -- derived products ----------------------------------------------------

    def _stamp(self, dataset_id: str) -> float:
        """Manifest mtime; folding it into every key evicts stale entries
        when the manifest changes."""
        return os.path.getmtime(self.manifest_path(dataset_id))

    def stack(self, dataset_id: str) -> SpectralStack:
        path = self.manifest_path(dataset_id)
        key = f"{dataset_id}:stack:{_param_key(self._stamp(dataset_id))}"
        return self._memo(key, lambda: sio.load_dataset(path))

    def normals(self, dataset_id: str, band_label: str,
                highlight_removal: bool = False,
                th_ev: float = 0.13) -> NormalMap:
        key = (f"{dataset_id}:normals:"
               f"{_param_key(self._stamp(dataset_id), band_label, highlight_removal, th_ev)}")

        def compute():
            stack = self.stack(dataset_id)
            band = stack.band(band_label)
            highlight = (
                detect_highlights(stack, band, th_ev=th_ev)
                if highlight_removal
                else None
            )
            return solve_normals(stack, band, highlight=highlight)

        return self._memo(key, compute)

    def pyramid(self, dataset_id: str, band_labels: tuple[str, ...],
                levels: int = 6, base_width_px: int = 1):
        key = (f"{dataset_id}:pyramid:"
               f"{_param_key(self._stamp(dataset_id), band_labels, levels, base_width_px)}")

        def compute():
            normals = {b: self.normals(dataset_id, b) for b in band_labels}
            return build_pyramid(normals, None, levels=levels,
                                 base_width_px=base_width_px)

        return self._memo(key, compute)

    def enhancement_per_level(
        self,
        dataset_id: str,
        band_vis: str,
        band_nir: str,
        mode: str,
        light: LightDirection,
        r: int,
        th: float,
        levels: int = 6,
    ) -> list:
        key = (f"{dataset_id}:enh:"
               f"{_param_key(self._stamp(dataset_id), band_vis, band_nir, mode, light.as_array().tolist(), r, th, levels)}")

        def compute():
            pyr = self.pyramid(dataset_id, (band_vis, band_nir), levels=levels)
            maps = []
            for level in pyr.levels:
                if mode == "dynamic":
                    c = dynamic_enhancement(
                        level.normals[band_vis], level.normals[band_nir],
                        light, r=r, th=th,
                    )
                else:
                    k_vis = curvature_magnitude(
                        curvature_maps(level.normals[band_vis]))
                    k_nir = curvature_magnitude(
                        curvature_maps(level.normals[band_nir]))
                    c = static_enhancement(k_vis, k_nir, th=th)
                maps.append(c.values)
            return maps

        return self._memo(key, compute)
