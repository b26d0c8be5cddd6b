"""Validation reporting: metrics JSON, delimited metrics, and matplotlib
figures (error heat maps with the fixed 0-30 degree scale, histograms and
per-band summaries)."""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .synth import ErrorReport


def save_heat_map_figure(report: ErrorReport, path: str, title: str) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    shown = np.where(report.mask, report.per_pixel_deg, np.nan)
    im = ax.imshow(shown, cmap="jet", vmin=0.0, vmax=ErrorReport.HEAT_SCALE_DEG)
    ax.set_title(title)
    ax.axis("off")
    cbar = fig.colorbar(im, ax=ax, shrink=0.85)
    cbar.set_label("angular error (deg)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_error_histogram(report: ErrorReport, path: str, title: str) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.hist(report.per_pixel_deg[report.mask].ravel(), bins=60,
            color="#4B8BBE", alpha=0.9)
    ax.set_xlabel("angular error (deg)")
    ax.set_ylabel("pixels")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_band_summary(metrics: dict[str, dict], path: str) -> None:
    labels = list(metrics.keys())
    means = [metrics[b]["mean_deg"] for b in labels]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.bar(labels, means, color="#4B8BBE")
    ax.set_ylabel("mean angular error (deg)")
    ax.set_title("Per-band reconstruction error")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_validation_report(
    out_dir: str,
    metrics: dict[str, dict],
    reports: dict[str, ErrorReport],
    report_path: str | None = None,
) -> str:
    """Write report.json, metrics.csv and the figure set for a validation
    run; returns the JSON path."""
    os.makedirs(out_dir, exist_ok=True)
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)

    for band, rep in reports.items():
        save_heat_map_figure(
            rep, os.path.join(fig_dir, f"heatmap_{band}.png"),
            f"{band}: mean {rep.mean_deg:.3f} deg",
        )
        save_error_histogram(
            rep, os.path.join(fig_dir, f"hist_{band}.png"),
            f"{band} error distribution",
        )
    if metrics:
        save_band_summary(metrics, os.path.join(fig_dir, "summary.png"))

    csv_path = os.path.join(out_dir, "metrics.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["band", "compared_to", "mean_deg", "median_deg",
                         "max_deg", "valid_pixels"])
        for band, m in metrics.items():
            writer.writerow([
                band, m["compared_to"], f"{m['mean_deg']:.6f}",
                f"{m['median_deg']:.6f}", f"{m['max_deg']:.6f}",
                m["valid_pixels"],
            ])

    json_path = report_path or os.path.join(out_dir, "report.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump({"bands": metrics}, fh, indent=2)
        fh.write("\n")
    return json_path
