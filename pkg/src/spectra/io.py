"""Dataset I/O: manifest JSON, PNG images, and PFM float maps.

Manifest schema (UTF-8 JSON):

    {
      "dataset": "name",
      "attribution": "optional credit line",
      "bands": [{"label": "vis", "kind": "visible-combined",
                 "wavelength_nm": [400, 700]}, ...],
      "lights": [[x, y, z], ...],
      "exposures": {"vis": [0.2, 0.5, 0.7], ...},
      "files": [{"band": "vis", "light": 0, "ev": 0,
                 "path": "images/vis_l00_ev0.png"}, ...]
    }

PNG inputs may be 8- or 16-bit, grayscale or RGB; values are scaled to
[0, 1]. PFM inputs (32-bit float) pass through unscaled. Normals and other
float maps are persisted as little-endian PFM, raw 3-channel floats.
"""

from __future__ import annotations

import json
import os
import struct
from typing import Optional

import cv2
import numpy as np

from .types import (
    Band,
    LightDirection,
    LoadError,
    Manifest,
    NormalMap,
    ParameterError,
    SpectralStack,
    StructuralError,
)


# --------------------------------------------------------------------------
# Manifest
# --------------------------------------------------------------------------

def load_manifest(path: str) -> Manifest:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LoadError(f"manifest {path}: invalid JSON: {exc}") from exc

    for key in ("dataset", "bands", "lights", "exposures", "files"):
        if key not in doc:
            raise LoadError(f"manifest {path}: missing key {key!r}")

    bands = [Band.make(b["label"], b["wavelength_nm"], b["kind"])
             for b in doc["bands"]]
    labels = [b.label for b in bands]
    if len(set(labels)) != len(labels):
        raise StructuralError(f"manifest {path}: duplicate band labels")

    lights = [LightDirection.from_vector(v) for v in doc["lights"]]
    light_ids = sorted({f["light"] for f in doc["files"]})
    if light_ids and light_ids != list(range(light_ids[-1] + 1)):
        raise StructuralError(
            f"manifest {path}: light indices must be dense from 0, got {light_ids}"
        )

    return Manifest(
        dataset=doc["dataset"],
        bands=bands,
        lights=lights,
        exposures={k: list(map(float, v)) for k, v in doc["exposures"].items()},
        files=[dict(f) for f in doc["files"]],
        attribution=doc.get("attribution", ""),
        root=os.path.dirname(os.path.abspath(path)),
    )


def save_manifest(manifest: Manifest, path: str) -> None:
    doc = {
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
        "files": manifest.files,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# --------------------------------------------------------------------------
# Images
# --------------------------------------------------------------------------

def load_image(path: str) -> np.ndarray:
    """Load a PNG or PFM image as float64 in [0, 1] (PFM passes through)."""
    if path.lower().endswith(".pfm"):
        return read_pfm(path)
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise LoadError(f"cannot decode image {path}")
    if raw.ndim == 3:
        if raw.shape[2] == 4:
            raw = raw[:, :, :3]
        raw = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
    if raw.dtype == np.uint8:
        return raw.astype(np.float64) / 255.0
    if raw.dtype == np.uint16:
        return raw.astype(np.float64) / 65535.0
    if raw.dtype in (np.float32, np.float64):
        return raw.astype(np.float64)
    raise LoadError(f"unsupported image dtype {raw.dtype} in {path}")


def save_png(image: np.ndarray, path: str) -> None:
    """Save a float image in [0, 1] as an 8-bit PNG (no ancillary chunks)."""
    data = encode_png(image)
    with open(path, "wb") as fh:
        fh.write(data)


def encode_png(image: np.ndarray) -> bytes:
    """Encode a float image in [0, 1] to deterministic 8-bit PNG bytes."""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    arr8 = np.round(arr * 255.0).astype(np.uint8)
    if arr8.ndim == 3:
        arr8 = cv2.cvtColor(arr8, cv2.COLOR_RGB2BGR)
    ok, buf = cv2.imencode(".png", arr8)
    if not ok:
        raise ParameterError("PNG encoding failed")
    return buf.tobytes()


# --------------------------------------------------------------------------
# PFM (portable float map, little-endian)
# --------------------------------------------------------------------------

def write_pfm(image: np.ndarray, path: str) -> None:
    image = np.asarray(image, dtype=np.float32)
    if image.ndim == 2:
        header = b"Pf"
    elif image.ndim == 3 and image.shape[2] == 3:
        header = b"PF"
    else:
        raise ParameterError(f"PFM supports 1 or 3 channels, got shape {image.shape}")
    h, w = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(header + b"\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")  # negative scale = little-endian
        fh.write(np.flipud(image).astype("<f4").tobytes())


def read_pfm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header == b"PF":
            channels = 3
        elif header == b"Pf":
            channels = 1
        else:
            raise LoadError(f"{path}: not a PFM file (header {header!r})")
        dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        count = w * h * channels
        data = np.frombuffer(fh.read(count * 4), dtype="<f4" if scale < 0 else ">f4")
        if data.size != count:
            raise LoadError(f"{path}: truncated PFM payload")
    shape = (h, w, channels) if channels == 3 else (h, w)
    return np.flipud(data.reshape(shape)).astype(np.float64)


def save_normal_map(nmap: NormalMap, path: str) -> None:
    """Persist normals as raw 3-channel PFM; masked-out pixels become zeros."""
    data = nmap.normals.copy()
    data[~nmap.mask] = 0.0
    write_pfm(data, path)


def load_normal_map(path: str, band: Optional[Band] = None) -> NormalMap:
    data = read_pfm(path)
    if data.ndim != 3:
        raise LoadError(f"{path}: normal map must be 3-channel PFM")
    norms = np.linalg.norm(data, axis=-1)
    mask = norms > 0.5
    return NormalMap(normals=data, mask=mask, band=band)


# --------------------------------------------------------------------------
# Dataset assembly
# --------------------------------------------------------------------------

def load_dataset(manifest_path: str) -> SpectralStack:
    """Load every image referenced by a manifest into a SpectralStack.

    Raises LoadError naming the (band, light, ev) triple for a missing or
    undecodable file, and StructuralError for dimension mismatches.
    """
    manifest = load_manifest(manifest_path)
    images: dict[tuple[str, int, int], np.ndarray] = {}
    width = height = None
    for entry in manifest.files:
        triple = (entry["band"], int(entry["light"]), int(entry["ev"]))
        path = os.path.join(manifest.root, entry["path"])
        if not os.path.exists(path):
            raise LoadError(
                f"missing file for (band={triple[0]}, light={triple[1]}, "
                f"ev={triple[2]}): {path}"
            )
        try:
            img = load_image(path)
        except LoadError as exc:
            raise LoadError(
                f"undecodable file for (band={triple[0]}, light={triple[1]}, "
                f"ev={triple[2]}): {exc}"
            ) from exc
        if width is None:
            height, width = img.shape[:2]
        elif img.shape[:2] != (height, width):
            raise StructuralError(
                f"image for (band={triple[0]}, light={triple[1]}, ev={triple[2]}) "
                f"is {img.shape[:2]}, expected ({height}, {width})"
            )
        images[triple] = img

    if not images:
        raise LoadError(f"manifest {manifest_path} references no files")

    return SpectralStack(
        width=width,
        height=height,
        images=images,
        bands=manifest.bands,
        lights=manifest.lights,
        exposures=manifest.exposures,
    )
