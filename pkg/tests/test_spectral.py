import numpy as np
import pytest
import scipy.signal

from spectra.spectral import (
    coherence_mask,
    magnitude_squared_coherence,
)
from spectra.types import ParameterError


def test_self_coherence_is_one(rng):
    x = rng.standard_normal(1024)
    _, coh = magnitude_squared_coherence(x, x, nperseg=64)
    np.testing.assert_allclose(coh, 1.0, atol=1e-9)


def test_pure_gain_pair_fully_coherent(rng):
    x = rng.standard_normal(2048) + 0.5
    _, coh = magnitude_squared_coherence(x, 2.0 * x, nperseg=64)
    np.testing.assert_allclose(coh, 1.0, atol=1e-9)


def test_matches_scipy_reference(rng):
    """Independent oracle: scipy's Welch coherence with the same windowing."""
    x = rng.standard_normal(4096)
    y = 0.6 * x + 0.8 * rng.standard_normal(4096)
    nperseg = 128
    freqs, coh = magnitude_squared_coherence(x, y, nperseg)
    ref_f, ref_c = scipy.signal.coherence(
        x, y, window="hann", nperseg=nperseg, noverlap=nperseg // 2,
        detrend="constant",
    )
    np.testing.assert_allclose(freqs, ref_f, atol=1e-12)
    # skip DC: the demeaned DC bin is power-starved and defined as 1 here
    np.testing.assert_allclose(coh[1:], ref_c[1:], atol=1e-8)


def test_independent_noise_mostly_flagged(rng):
    """Simulated with the reference implementation: white noise pairs have
    low coherence at nearly every bin."""
    img0 = rng.random((32, 32))
    img1 = rng.random((32, 32))
    report = coherence_mask([img0, img1], th_ev=0.13)
    coh = report.coherence[1]
    assert coh.mean() < 0.3
    assert report.flagged[1].mean() > 0.5


def test_gain_pair_nothing_flagged(rng):
    img0 = rng.random((32, 32))
    report = coherence_mask([img0, 2.0 * img0, 4.0 * img0], th_ev=0.13)
    for k in (1, 2):
        assert not report.flagged[k].any()
    np.testing.assert_allclose(report.suspicion, 0.0, atol=1e-12)


def test_synthetic_bloom_raises_suspicion(rng):
    """Texture visible at EV0 is blown out to flat saturation at the longer
    exposures, so the bloom decorrelates exactly where it saturates."""
    yy, xx = np.mgrid[0:64, 0:64]
    bloom = (xx - 24) ** 2 + (yy - 36) ** 2 < 20**2
    texture = 0.5 + 0.35 * np.sin(2 * np.pi * xx / 4.0)

    img0 = 0.05 + 0.02 * rng.random((64, 64))
    img0[bloom] = texture[bloom]
    img1 = np.clip(2.0 * img0, 0.0, 1.0)  # bloom saturates flat
    img2 = np.clip(4.0 * img0, 0.0, 1.0)

    report = coherence_mask([img0, img1, img2], th_ev=0.13)
    assert any(f.any() for f in report.flagged.values())
    background = ~bloom
    assert report.suspicion[bloom].mean() > 2.0 * report.suspicion[background].mean()


def test_requires_two_exposures(rng):
    with pytest.raises(ParameterError):
        coherence_mask([rng.random((16, 16))])


def test_coherence_values_bounded(rng):
    for _ in range(5):
        x = rng.standard_normal(512)
        y = rng.standard_normal(512)
        _, coh = magnitude_squared_coherence(x, y, nperseg=32)
        assert coh.min() >= 0.0 and coh.max() <= 1.0
