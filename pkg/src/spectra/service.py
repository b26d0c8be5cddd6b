"""HTTP render service.

Endpoints:
    GET  /health          -> {"status": "ok"}
    GET  /datasets        -> JSON list of dataset summaries
    GET  /datasets/{id}   -> manifest summary (404 for unknown ids)
    POST /render          -> PNG bytes for a render request

Render requests are JSON: {"dataset": id, "mode": ..., "params": {...}}.
Invalid parameters return 422 with field-level messages; renders are pure
functions of the dataset and parameters, so identical requests produce
byte-identical PNGs whether or not the cache is enabled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

import numpy as np

from . import io as sio
from .color import luminance, rgb_to_yuv
from .enhancement import curvature_maps, curvature_magnitude
from .mlic import MlicParams, MlicStack, mlic_render
from .registry import DatasetRegistry, UnknownDatasetError
from .shading import (
    LineParams,
    SbsParams,
    curvature_shade,
    discontinuity_lines,
    light_strategy,
    nir_blend_toon,
    principal_curvature_lines,
    sbs_render,
    signed_curvature,
    suggestive_contours,
)
from .types import BandKind, LightDirection, ParameterError, SpectraError

RENDER_MODES = ("sbs", "curvature", "lines", "toon", "mlic", "lambertian")


@dataclass
class FieldError(Exception):
    field: str
    message: str


def _field_errors(errors: list[FieldError]) -> bytes:
    doc = {"errors": [{"field": e.field, "message": e.message} for e in errors]}
    return json.dumps(doc).encode()


def _parse_light(params: dict, errors: list[FieldError],
                 default=(0.3, 0.3, 0.9)) -> Optional[LightDirection]:
    raw = params.get("light", list(default))
    try:
        vec = [float(c) for c in raw]
        if len(vec) != 3:
            raise ValueError
        return LightDirection.from_vector(vec, normalize=True)
    except (TypeError, ValueError, ParameterError):
        errors.append(FieldError("light", "must be a normalizable [x, y, z]"))
        return None


def _number(params: dict, name: str, default, errors: list[FieldError],
            low=None, high=None, low_open=False):
    raw = params.get(name, default)
    try:
        val = float(raw)
    except (TypeError, ValueError):
        errors.append(FieldError(name, "must be a number"))
        return None
    if low is not None and (val <= low if low_open else val < low):
        errors.append(FieldError(name, f"must be {'>' if low_open else '>='} {low}"))
        return None
    if high is not None and val > high:
        errors.append(FieldError(name, f"must be <= {high}"))
        return None
    return val


class RenderService:
    """Pure request -> PNG dispatch over a dataset registry."""

    def __init__(self, registry: DatasetRegistry):
        self.registry = registry

    # -- request handling ----------------------------------------------------

    def handle_render(self, doc: dict) -> tuple[int, str, bytes]:
        errors: list[FieldError] = []
        dataset = doc.get("dataset")
        if not isinstance(dataset, str) or not dataset:
            errors.append(FieldError("dataset", "must be a dataset id"))
        mode = doc.get("mode")
        if mode not in RENDER_MODES:
            errors.append(
                FieldError("mode", f"must be one of {', '.join(RENDER_MODES)}")
            )
        if errors:
            return 422, "application/json", _field_errors(errors)

        try:
            summary = self.registry.describe(dataset)
        except UnknownDatasetError:
            return (
                404,
                "application/json",
                json.dumps({"error": f"unknown dataset {dataset!r}"}).encode(),
            )

        params = doc.get("params") or {}
        if not isinstance(params, dict):
            return 422, "application/json", _field_errors(
                [FieldError("params", "must be an object")]
            )
        try:
            image = self._render(dataset, summary, mode, params)
        except FieldError as fe:
            return 422, "application/json", _field_errors([fe])
        except SpectraError as exc:
            return (
                422,
                "application/json",
                _field_errors([FieldError("params", str(exc))]),
            )
        return 200, "image/png", sio.encode_png(image)

    # -- render dispatch ------------------------------------------------------

    def _band_labels(self, summary: dict) -> tuple[str, str]:
        """Default (visible, near-infrared) band pair for a dataset."""
        vis = nir = None
        for band in summary["bands"]:
            kind = BandKind(band["kind"])
            if vis is None and kind in (
                BandKind.VISIBLE_COMBINED, BandKind.VISIBLE_G,
                BandKind.VISIBLE_R, BandKind.VISIBLE_B,
            ):
                vis = band["label"]
            if nir is None and kind == BandKind.NIR:
                nir = band["label"]
        return vis or summary["bands"][0]["label"], nir or summary["bands"][-1]["label"]

    def _check_band(self, summary: dict, label: str) -> str:
        if label not in [b["label"] for b in summary["bands"]]:
            raise FieldError("band", f"unknown band {label!r}")
        return label

    def _render(self, dataset: str, summary: dict, mode: str,
                params: dict) -> np.ndarray:
        errors: list[FieldError] = []
        vis_default, nir_default = self._band_labels(summary)

        if mode == "lambertian":
            band = self._check_band(summary, params.get("band", vis_default))
            light = _parse_light(params, errors)
            if errors:
                raise errors[0]
            nmap = self.registry.normals(dataset, band)
            shade = np.clip(nmap.normals @ light.as_array(), 0.0, None)
            shade[~nmap.mask] = 0.0
            return shade

        if mode == "sbs":
            band_vis = self._check_band(summary, params.get("band_vis", vis_default))
            band_nir = self._check_band(summary, params.get("band_nir", nir_default))
            light = _parse_light(params, errors)
            a = _number(params, "a", 35.0, errors, low=0.0, low_open=True)
            f = _number(params, "f", 0.0, errors, low=-1.0, high=1.0)
            r = _number(params, "r", 13, errors, low=1.0)
            th = _number(params, "th", 0.1, errors, low=0.0)
            levels = _number(params, "levels", 6, errors, low=1.0)
            enh_mode = params.get("enhancement", "dynamic")
            if enh_mode not in ("dynamic", "static"):
                errors.append(FieldError("enhancement", "must be dynamic or static"))
            strategy = params.get("strategy", "enhancement-map")
            if strategy not in ("enhancement-map", "multilight", "static-principal"):
                errors.append(
                    FieldError("strategy", "must be enhancement-map, multilight "
                               "or static-principal")
                )
            if errors:
                raise errors[0]
            levels = int(levels)
            pyr = self.registry.pyramid(dataset, (band_vis, band_nir), levels=levels)
            c_maps = self.registry.enhancement_per_level(
                dataset, band_vis, band_nir, enh_mode, light, int(r), th, levels
            )
            sbs = SbsParams(a=a, f=f, r=int(r), th=th, strategy=strategy,
                            l_global=light)
            lights = light_strategy(
                strategy, pyr, band_vis, band_nir, c_light=light, l_global=light
            )
            return sbs_render(pyr, c_maps, sbs, lights,
                              band_vis=band_vis, band_nir=band_nir)

        if mode == "curvature":
            band_vis = self._check_band(summary, params.get("band_vis", vis_default))
            band_nir = self._check_band(summary, params.get("band_nir", nir_default))
            q = _number(params, "q", 10.0, errors, low=0.0, low_open=True)
            th = _number(params, "th", 0.02, errors, low=0.0)
            levels = _number(params, "levels", 4, errors, low=1.0)
            light = _parse_light(params, errors)
            if errors:
                raise errors[0]
            levels = int(levels)
            pyr = self.registry.pyramid(dataset, (band_vis, band_nir), levels=levels)
            c_maps = self.registry.enhancement_per_level(
                dataset, band_vis, band_nir, "static", light, 13, th, levels
            )
            k_vis = [signed_curvature(curvature_maps(lv.normals[band_vis]))
                     for lv in pyr.levels]
            k_nir = [signed_curvature(curvature_maps(lv.normals[band_nir]))
                     for lv in pyr.levels]
            return curvature_shade(k_vis, k_nir, c_maps, q, pyr.weights)

        if mode == "lines":
            band = self._check_band(summary, params.get("band", nir_default))
            line_type = params.get("line_type", "suggestive")
            if line_type not in ("suggestive", "discontinuity", "principal"):
                raise FieldError(
                    "line_type", "must be suggestive, discontinuity or principal"
                )
            nmap = self.registry.normals(dataset, band)
            lp = LineParams()
            if line_type == "suggestive":
                marks = suggestive_contours(nmap, lp)
            elif line_type == "discontinuity":
                marks = discontinuity_lines(nmap, lp)
            else:
                marks = principal_curvature_lines(curvature_maps(nmap), lp)
            return 1.0 - marks.astype(np.float64)  # ink on white

        if mode == "toon":
            band_vis = self._check_band(summary, params.get("band_vis", vis_default))
            band_nir = self._check_band(summary, params.get("band_nir", nir_default))
            k = _number(params, "k", 4, errors, low=2.0)
            light = _parse_light(params, errors)
            blend = params.get("blend_color", [0.2, 0.25, 0.3])
            try:
                blend = tuple(float(c) for c in blend)
                if len(blend) != 3:
                    raise ValueError
            except (TypeError, ValueError):
                errors.append(FieldError("blend_color", "must be [r, g, b]"))
            if errors:
                raise errors[0]
            stack = self.registry.stack(dataset)
            vis_img = stack.image(band_vis, 0, 0)
            nir_img = luminance(stack.image(band_nir, 0, 0))
            n_vis = self.registry.normals(dataset, band_vis)
            return nir_blend_toon(vis_img, n_vis, nir_img, int(k), blend, light)

        if mode == "mlic":
            beta = _number(params, "beta", 0.5, errors, low=0.0, high=1.0,
                           low_open=True)
            light = _parse_light(params, errors)
            traditional = bool(params.get("traditional", False))
            if errors:
                raise errors[0]
            stack = self.registry.stack(dataset)
            vis, _ = self._band_labels(summary)
            bis_label = None
            for band in summary["bands"]:
                if BandKind(band["kind"]) in (
                    BandKind.BISPECTRAL_EMISSION, BandKind.UV_EXCITATION
                ):
                    bis_label = band["label"]
                    break
            yuv, y_bis, lights = [], [], []
            for li in stack.light_indices(vis):
                img = stack.image(vis, li, 0)
                if img.ndim == 2:
                    img = np.repeat(img[..., None], 3, axis=-1)
                yuv.append(rgb_to_yuv(img))
                if bis_label is not None and (bis_label, li, 0) in stack.images:
                    y_bis.append(luminance(stack.image(bis_label, li, 0)))
                else:
                    y_bis.append(np.zeros(img.shape[:2]))
                lights.append(stack.lights[li])
            mstack = MlicStack(yuv=yuv, y_bis=y_bis, lights=lights)
            return mlic_render(mstack, light, MlicParams(beta=beta),
                               traditional=traditional)

        raise FieldError("mode", f"unhandled mode {mode!r}")


def make_handler(service: RenderService):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):  # keep test output quiet
            pass

        def _send(self, status: int, content_type: str, body: bytes):
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_json(self, status: int, doc):
            self._send(status, "application/json", json.dumps(doc).encode())

        def do_GET(self):
            if self.path == "/health":
                self._send_json(200, {"status": "ok"})
            elif self.path == "/datasets":
                self._send_json(200, service.registry.list_datasets())
            elif self.path.startswith("/datasets/"):
                dataset_id = self.path[len("/datasets/"):]
                try:
                    self._send_json(200, service.registry.describe(dataset_id))
                except UnknownDatasetError:
                    self._send_json(
                        404, {"error": f"unknown dataset {dataset_id!r}"}
                    )
            else:
                self._send_json(404, {"error": "not found"})

        def do_POST(self):
            if self.path != "/render":
                self._send_json(404, {"error": "not found"})
                return
            length = int(self.headers.get("Content-Length", 0))
            try:
                doc = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                self._send_json(422, {"errors": [
                    {"field": "body", "message": "invalid JSON"}
                ]})
                return
            status, ctype, body = service.handle_render(doc)
            self._send(status, ctype, body)

    return Handler


def make_server(registry: DatasetRegistry, host: str = "127.0.0.1",
                port: int = 8787) -> ThreadingHTTPServer:
    service = RenderService(registry)
    return ThreadingHTTPServer((host, port), make_handler(service))


def serve(registry: DatasetRegistry, host: str = "127.0.0.1",
          port: int = 8787) -> None:
    server = make_server(registry, host, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
