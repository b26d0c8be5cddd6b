"""Welch-averaged coherence analysis for multi-exposure highlight detection.

Exposure pairs that differ only by gain are coherent at every frequency;
saturated highlight bloom breaks that linear relationship, so frequency
bins with low magnitude-squared coherence flag contaminated content. A
spatial suspicion map is derived by band-limiting the gain-compensated
residual between exposures to the flagged bins and back-projecting its
energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .types import ParameterError

DEFAULT_TH_EV = 0.13


def _hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _segments(x: np.ndarray, nperseg: int, noverlap: int) -> np.ndarray:
    step = nperseg - noverlap
    count = 1 + (len(x) - nperseg) // step
    idx = np.arange(nperseg)[None, :] + step * np.arange(count)[:, None]
    return x[idx]


def welch_cross_spectra(
    x: np.ndarray,
    y: np.ndarray,
    nperseg: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Averaged modified periodograms: frequencies, Pxx, Pyy, Pxy.

    Hann window, 50% overlap, per-segment mean removal. Scaling constants
    cancel in coherence so none are applied.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("signals must be equal-length 1-D arrays")
    if nperseg < 4 or nperseg > len(x):
        raise ParameterError(f"invalid segment length {nperseg} for n={len(x)}")

    window = _hann(nperseg)
    noverlap = nperseg // 2
    segs_x = _segments(x, nperseg, noverlap)
    segs_y = _segments(y, nperseg, noverlap)
    segs_x = (segs_x - segs_x.mean(axis=1, keepdims=True)) * window
    segs_y = (segs_y - segs_y.mean(axis=1, keepdims=True)) * window
    fx = np.fft.rfft(segs_x, axis=1)
    fy = np.fft.rfft(segs_y, axis=1)
    pxx = np.mean(np.abs(fx) ** 2, axis=0)
    pyy = np.mean(np.abs(fy) ** 2, axis=0)
    pxy = np.mean(np.conj(fx) * fy, axis=0)
    freqs = np.fft.rfftfreq(nperseg)
    return freqs, pxx, pyy, pxy


def magnitude_squared_coherence(
    x: np.ndarray, y: np.ndarray, nperseg: int
) -> tuple[np.ndarray, np.ndarray]:
    """C_xy(f) = |Pxy|^2 / (Pxx * Pyy), in [0, 1].

    Bins with negligible power in either signal are reported as fully
    coherent (1) so that empty bands are never flagged.
    """
    freqs, pxx, pyy, pxy = welch_cross_spectra(x, y, nperseg)
    denom = pxx * pyy
    floor = 1e-30 * max(float(denom.max()), 1e-300)
    coh = np.ones_like(denom)
    ok = denom > floor
    coh[ok] = np.abs(pxy[ok]) ** 2 / denom[ok]
    return freqs, np.clip(coh, 0.0, 1.0)


@dataclass
class CoherenceReport:
    """Coherence spectra between EV0 and each longer exposure, plus the
    derived spatial suspicion map."""

    freqs: np.ndarray
    coherence: dict[int, np.ndarray]  # exposure index -> C_xy(f)
    flagged: dict[int, np.ndarray]  # exposure index -> bool per bin
    th_ev: float
    suspicion: np.ndarray = field(default=None)  # (H, W) in [0, 1]

    def __post_init__(self):
        for c in self.coherence.values():
            if c.min() < -1e-12 or c.max() > 1.0 + 1e-12:
                raise ParameterError("coherence values outside [0, 1]")


def _pad_pow2(image: np.ndarray) -> np.ndarray:
    h, w = image.shape
    ph = 1 << (h - 1).bit_length()
    pw = 1 << (w - 1).bit_length()
    if (ph, pw) == (h, w):
        return image
    return np.pad(image, ((0, ph - h), (0, pw - w)), mode="edge")


def _band_limited_energy(
    signal: np.ndarray, flagged: np.ndarray, welch_freqs: np.ndarray
) -> np.ndarray:
    """Back-project the energy of a signal restricted to flagged Welch bands."""
    n = len(signal)
    spec = np.fft.rfft(signal)
    full_freqs = np.fft.rfftfreq(n)
    if len(welch_freqs) > 1:
        half_bw = 0.5 * (welch_freqs[1] - welch_freqs[0])
    else:
        half_bw = 0.5
    keep = np.zeros(len(full_freqs), dtype=bool)
    for f in welch_freqs[flagged]:
        keep |= np.abs(full_freqs - f) <= half_bw
    spec[~keep] = 0.0
    return np.abs(np.fft.irfft(spec, n=n))


def coherence_mask(
    ev_images: list[np.ndarray],
    th_ev: float = DEFAULT_TH_EV,
) -> CoherenceReport:
    """Locate highlight-contaminated content across an exposure series.

    The images (EV0 first, at least two) are padded to power-of-two
    dimensions, scanned row-major into 1-D signals, and coherence between
    EV0 and each longer exposure is estimated with segment length one
    quarter of the padded row length. Bins below th_ev are flagged; the
    suspicion map is the normalized flagged-band energy of the
    gain-compensated residual of each exposure pair.
    """
    if len(ev_images) < 2:
        raise ParameterError("coherence_mask needs at least 2 exposures")
    h, w = ev_images[0].shape[:2]
    flat = []
    for img in ev_images:
        img = np.asarray(img, dtype=np.float64)
        if img.ndim == 3:
            img = img.mean(axis=2)
        if img.shape != (h, w):
            raise ParameterError("exposure images must share dimensions")
        flat.append(_pad_pow2(img).ravel())

    nperseg = max(8, _pad_pow2(ev_images[0]).shape[1] // 4)
    base = flat[0]
    coherence: dict[int, np.ndarray] = {}
    flagged: dict[int, np.ndarray] = {}
    suspicion_acc = np.zeros_like(base)
    freqs = None
    for k, sig in enumerate(flat[1:], start=1):
        freqs, coh = magnitude_squared_coherence(base, sig, nperseg)
        coherence[k] = coh
        flags = coh < th_ev
        flagged[k] = flags
        if flags.any():
            # least-squares gain so a pure exposure shift yields zero residual
            denom = float(base @ base)
            gain = float(sig @ base) / denom if denom > 0 else 1.0
            residual = sig - gain * base
            suspicion_acc += _band_limited_energy(residual, flags, freqs)

    pad_shape = _pad_pow2(ev_images[0] if ev_images[0].ndim == 2
                          else ev_images[0].mean(axis=2)).shape
    suspicion = suspicion_acc.reshape(pad_shape)[:h, :w]
    peak = suspicion.max()
    if peak > 0:
        suspicion = suspicion / peak

    return CoherenceReport(
        freqs=freqs,
        coherence=coherence,
        flagged=flagged,
        th_ev=th_ev,
        suspicion=suspicion,
    )
