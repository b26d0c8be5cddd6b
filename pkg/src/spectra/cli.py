"""Command-line entry points for the full pipeline."""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from . import io as sio
from .enhancement import (
    curvature_magnitude,
    curvature_maps,
    dynamic_enhancement,
    static_enhancement,
)
from .photometric import detect_highlights, solve_normals
from .registration import (
    RsnccParams,
    composite_image,
    global_align,
    local_align,
)
from .registry import DatasetRegistry
from .service import RenderService, make_server
from .synth import (
    GrooveSpec,
    angular_error,
    gen_layered_sphere,
    save_synthetic_dataset,
)
from .types import BandKind, LightDirection, SpectraError


def _echo_params(ctx, **values):
    if ctx.obj and ctx.obj.get("verbose"):
        for name, value in values.items():
            click.echo(f"[params] {name} = {value}", err=True)


def _parse_light(text: str) -> LightDirection:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise click.BadParameter("light must be x,y,z")
    return LightDirection.from_vector(parts, normalize=True)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Echo effective parameter values.")
@click.pass_context
def main(ctx, verbose):
    """Multispectral normal reconstruction and stylized rendering."""
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose


def _run(fn):
    try:
        fn()
    except SpectraError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command("compute-normals")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--band", required=True)
@click.option("--th-ev", default=0.13, show_default=True,
              help="Coherence threshold for highlight flagging.")
@click.option("--highlight-removal/--no-highlight-removal", default=False,
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def compute_normals_cmd(ctx, manifest_path, band, th_ev, highlight_removal,
                        out_path):
    """Recover a band's normal map from a dataset."""

    def work():
        _echo_params(ctx, th_ev=th_ev, highlight_removal=highlight_removal)
        stack = sio.load_dataset(manifest_path)
        band_obj = stack.band(band)
        highlight = (detect_highlights(stack, band_obj, th_ev=th_ev)
                     if highlight_removal else None)
        nmap = solve_normals(stack, band_obj, highlight=highlight)
        sio.save_normal_map(nmap, out_path)
        click.echo(f"wrote {out_path} ({int(nmap.mask.sum())} valid pixels)")

    _run(work)


@main.command("register")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--ref", "ref_band", default="vis", show_default=True)
@click.option("--band", required=True)
@click.option("--out-h", "out_h", required=True, type=click.Path())
@click.option("--out-field", "out_field", type=click.Path())
@click.pass_context
def register_cmd(ctx, manifest_path, ref_band, band, out_h, out_field):
    """Align a band's composite onto the visible reference."""

    def work():
        params = RsnccParams()
        _echo_params(ctx, tau=params.tau, lambda1=params.lambda1,
                     lambda2=params.lambda2, patch_radius=params.patch_radius,
                     pyramid_levels=params.pyramid_levels)
        stack = sio.load_dataset(manifest_path)
        ref_img = composite_image(stack, stack.band(ref_band))
        mov_img = composite_image(stack, stack.band(band))
        h = global_align(mov_img, ref_img, params)
        with open(out_h, "w", encoding="utf-8") as fh:
            json.dump({"H": h.matrix.tolist(), "residual": h.residual}, fh,
                      indent=2)
        click.echo(f"wrote {out_h} (residual {h.residual:.4f})")
        if out_field:
            field = local_align(mov_img, ref_img, h, params)
            sio.write_pfm(
                np.stack([field.u, field.v, np.zeros_like(field.u)], axis=-1),
                out_field,
            )
            click.echo(f"wrote {out_field}")

    _run(work)


@main.command("enhance")
@click.option("--mode", type=click.Choice(["dynamic", "static"]), required=True)
@click.option("--vis", "vis_path", required=True, type=click.Path(exists=True))
@click.option("--nir", "nir_path", required=True, type=click.Path(exists=True))
@click.option("--l", "light", default="0.3,0.3,0.9", show_default=True)
@click.option("--r", default=13, show_default=True)
@click.option("--th", default=None, type=float,
              help="Threshold; defaults to 0.1 dynamic / 0.02 static.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def enhance_cmd(ctx, mode, vis_path, nir_path, light, r, th, out_path):
    """Compute a near-infrared enhancement map from two normal maps."""

    def work():
        threshold = th if th is not None else (0.1 if mode == "dynamic" else 0.02)
        _echo_params(ctx, mode=mode, l=light, r=r, th=threshold)
        n_vis = sio.load_normal_map(vis_path)
        n_nir = sio.load_normal_map(nir_path)
        if mode == "dynamic":
            c = dynamic_enhancement(n_vis, n_nir, _parse_light(light),
                                    r=r, th=threshold)
        else:
            k_vis = curvature_magnitude(curvature_maps(n_vis))
            k_nir = curvature_magnitude(curvature_maps(n_nir))
            c = static_enhancement(k_vis, k_nir, th=threshold)
        sio.write_pfm(c.values, out_path)
        click.echo(f"wrote {out_path} (mean C {float(c.values.mean()):.4f})")

    _run(work)


@main.group("shade")
def shade_group():
    """Stylized renderers."""


def _registry_for(manifest_path: str) -> tuple[DatasetRegistry, str]:
    root = os.path.dirname(os.path.abspath(manifest_path))
    parent = os.path.dirname(root)
    return DatasetRegistry(root=parent), os.path.basename(root)


def _render_via_service(manifest_path, mode, params, out_path, out_pfm=None):
    registry, dataset_id = _registry_for(manifest_path)
    service = RenderService(registry)
    status, ctype, body = service.handle_render(
        {"dataset": dataset_id, "mode": mode, "params": params}
    )
    if status != 200:
        raise SpectraError(body.decode())
    with open(out_path, "wb") as fh:
        fh.write(body)
    click.echo(f"wrote {out_path}")
    if out_pfm:
        image = sio.load_image(out_path)
        from .color import luminance

        sio.write_pfm(luminance(image).astype(np.float32), out_pfm)
        click.echo(f"wrote {out_pfm}")


@shade_group.command("sbs")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--band-vis", default=None)
@click.option("--band-nir", default=None)
@click.option("--l", "light", default="0.3,0.3,0.9", show_default=True)
@click.option("--a", default=35.0, show_default=True)
@click.option("--f", default=0.0, show_default=True)
@click.option("--r", default=13, show_default=True)
@click.option("--th", default=0.1, show_default=True)
@click.option("--levels", default=6, show_default=True)
@click.option("--enhancement", type=click.Choice(["dynamic", "static"]),
              default="dynamic", show_default=True)
@click.option("--strategy",
              type=click.Choice(["enhancement-map", "multilight",
                                 "static-principal"]),
              default="enhancement-map", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--out-pfm", default=None, type=click.Path())
@click.pass_context
def shade_sbs_cmd(ctx, manifest_path, band_vis, band_nir, light, a, f, r, th,
                  levels, enhancement, strategy, out_path, out_pfm):
    """Spectral band shading."""

    def work():
        _echo_params(ctx, a=a, f=f, r=r, th=th, levels=levels, l=light)
        params = {
            "light": [float(c) for c in light.split(",")],
            "a": a, "f": f, "r": r, "th": th, "levels": levels,
            "enhancement": enhancement, "strategy": strategy,
        }
        if band_vis:
            params["band_vis"] = band_vis
        if band_nir:
            params["band_nir"] = band_nir
        _render_via_service(manifest_path, "sbs", params, out_path, out_pfm)

    _run(work)


@shade_group.command("curvature")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--q", default=10.0, show_default=True)
@click.option("--th", default=0.02, show_default=True)
@click.option("--levels", default=4, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--out-pfm", default=None, type=click.Path())
@click.pass_context
def shade_curvature_cmd(ctx, manifest_path, q, th, levels, out_path, out_pfm):
    """Multiscale curvature shading."""

    def work():
        _echo_params(ctx, q=q, th=th, levels=levels)
        _render_via_service(manifest_path, "curvature",
                            {"q": q, "th": th, "levels": levels}, out_path,
                            out_pfm)

    _run(work)


@shade_group.command("lines")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--band", default=None)
@click.option("--line-type",
              type=click.Choice(["suggestive", "discontinuity", "principal"]),
              default="suggestive", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--out-pfm", default=None, type=click.Path())
@click.pass_context
def shade_lines_cmd(ctx, manifest_path, band, line_type, out_path, out_pfm):
    """Line extraction from a band's normals."""

    def work():
        _echo_params(ctx, line_type=line_type)
        params = {"line_type": line_type}
        if band:
            params["band"] = band
        _render_via_service(manifest_path, "lines", params, out_path, out_pfm)

    _run(work)


@shade_group.command("toon")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--k", default=4, show_default=True)
@click.option("--blend-color", default="0.2,0.25,0.3", show_default=True)
@click.option("--l", "light", default="0.3,0.3,0.9", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--out-pfm", default=None, type=click.Path())
@click.pass_context
def shade_toon_cmd(ctx, manifest_path, k, blend_color, light, out_path,
                   out_pfm):
    """Quantized near-infrared blend with Lambertian shading."""

    def work():
        _echo_params(ctx, k=k, blend_color=blend_color, l=light)
        _render_via_service(
            manifest_path, "toon",
            {
                "k": k,
                "blend_color": [float(c) for c in blend_color.split(",")],
                "light": [float(c) for c in light.split(",")],
            },
            out_path,
            out_pfm,
        )

    _run(work)


@main.command("mlic")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--beta", default=0.5, show_default=True)
@click.option("--l", "light", default="0.3,0.3,0.9", show_default=True)
@click.option("--traditional", is_flag=True, default=False,
              help="Visible-only baseline without the bispectral term.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def mlic_cmd(ctx, manifest_path, beta, light, traditional, out_path):
    """Multilight enhancement render."""

    def work():
        _echo_params(ctx, beta=beta, l=light, traditional=traditional)
        _render_via_service(
            manifest_path, "mlic",
            {
                "beta": beta,
                "light": [float(c) for c in light.split(",")],
                "traditional": traditional,
            },
            out_path,
        )

    _run(work)


@main.command("synth")
@click.option("--preset", type=click.Choice(["layered-sphere"]),
              default="layered-sphere", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--radius", default=64, show_default=True)
@click.option("--rings", default=4, show_default=True)
@click.option("--noise", default=0.0, show_default=True)
@click.option("--specular", default=0.0, show_default=True)
@click.pass_context
def synth_cmd(ctx, preset, out_dir, radius, rings, noise, specular):
    """Generate a synthetic layered ground-truth dataset."""

    def work():
        _echo_params(ctx, radius=radius, rings=rings, noise=noise,
                     specular=specular)
        scene = gen_layered_sphere(
            radius_px=radius, groove=GrooveSpec(rings=rings),
            transmission={"vis": 0.0, "nir720": 1.0},
        )
        os.makedirs(out_dir, exist_ok=True)
        manifest = save_synthetic_dataset(
            out_dir, scene=scene, noise_sigma=noise,
            specular_strength=specular,
        )
        click.echo(f"wrote {manifest}")

    _run(work)


@main.command("validate")
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True))
@click.option("--report", "report_path", default=None, type=click.Path())
@click.option("--highlight-removal/--no-highlight-removal", default=False,
              show_default=True)
@click.pass_context
def validate_cmd(ctx, dataset_dir, report_path, highlight_removal):
    """Reconstruct a synthetic dataset and score it against ground truth."""

    def work():
        from .report import write_validation_report

        _echo_params(ctx, highlight_removal=highlight_removal)
        manifest_path = os.path.join(dataset_dir, "manifest.json")
        stack = sio.load_dataset(manifest_path)
        gt_top = sio.load_normal_map(os.path.join(dataset_dir, "gt_top.pfm"))
        gt_bottom = sio.load_normal_map(os.path.join(dataset_dir, "gt_bottom.pfm"))

        metrics, reports = {}, {}
        for band in stack.bands:
            highlight = (detect_highlights(stack, band)
                         if highlight_removal else None)
            recovered = solve_normals(stack, band, highlight=highlight)
            truth = gt_bottom if band.kind == BandKind.NIR else gt_top
            layer = "gt_bottom" if band.kind == BandKind.NIR else "gt_top"
            rep = angular_error(recovered, truth)
            reports[band.label] = rep
            metrics[band.label] = {
                "compared_to": layer,
                "mean_deg": rep.mean_deg,
                "median_deg": rep.median_deg,
                "max_deg": rep.max_deg,
                "valid_pixels": int(rep.mask.sum()),
            }
            click.echo(
                f"{band.label}: mean {rep.mean_deg:.4f} deg vs {layer}"
            )
        out = write_validation_report(dataset_dir, metrics, reports,
                                      report_path)
        click.echo(f"wrote {out}")

    _run(work)


@main.command("serve")
@click.option("--bind", default="127.0.0.1:8787", show_default=True)
@click.option("--data-dir", default=None,
              help="Dataset root; defaults to $SPECTRA_DATA_DIR.")
@click.option("--no-cache", is_flag=True, default=False)
@click.pass_context
def serve_cmd(ctx, bind, data_dir, no_cache):
    """Run the HTTP render service."""

    def work():
        host, _, port = bind.partition(":")
        registry = DatasetRegistry(root=data_dir,
                                   cache_enabled=not no_cache)
        _echo_params(ctx, bind=bind, data_dir=registry.root,
                     cache=not no_cache)
        server = make_server(registry, host or "127.0.0.1",
                             int(port or 8787))
        click.echo(f"serving on {bind} (datasets: {registry.dataset_ids()})")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()

    _run(work)


if __name__ == "__main__":
    main()
