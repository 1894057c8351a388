import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acoustic_power import spectral
from acoustic_power.audio_io import AudioSegment
from acoustic_power.errors import DegenerateBinError, DimensionError, InvalidBandError, InvalidInputError
from acoustic_power.spectral import BandSpec, Scaler, Spectrum

from oracles import direct_magnitudes

DEFAULT_BAND = BandSpec(166, 700, 15)


def seg(x, fs=8):
    return AudioSegment(np.asarray(x, dtype=float), fs)


def test_constant_signal():
    mags = spectral.dft_magnitudes(seg(np.ones(8))).magnitudes
    assert len(mags) == 5
    assert mags[0] == pytest.approx(8)
    np.testing.assert_allclose(mags[1:], 0, atol=1e-12)


def test_single_tone():
    n = np.arange(8)
    mags = spectral.dft_magnitudes(seg(np.cos(2 * np.pi * 2 * n / 8))).magnitudes
    expected = np.zeros(5)
    expected[2] = 4
    np.testing.assert_allclose(mags, expected, atol=1e-12)


@pytest.mark.parametrize("n", [16, 243, 1024])
def test_matches_direct_summation(n):
    rng = np.random.default_rng(n)
    for _ in range(10):
        x = rng.uniform(-1, 1, n)
        fast = spectral.dft_magnitudes(seg(x, 1000)).magnitudes
        slow = direct_magnitudes(x)
        assert np.max(np.abs(fast - slow)) / np.max(slow) < 1e-9


def test_spectrum_length_and_resolution():
    s = spectral.dft_magnitudes(seg(np.zeros(243), 1000))
    assert len(s.magnitudes) == 243 // 2 + 1
    assert s.freq_resolution_hz == 1000 / 243


def test_non_finite_rejected():
    with pytest.raises(InvalidInputError):
        spectral.dft_magnitudes(seg([0.0, np.nan, 1.0]))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 300), seed=st.integers(0, 2**32 - 1))
def test_parseval(n, seed):
    x = np.random.default_rng(seed).normal(size=n)
    mags = spectral.dft_magnitudes(seg(x, 100)).magnitudes
    weights = np.full(len(mags), 2.0)
    weights[0] = 1
    if n % 2 == 0:
        weights[-1] = 1
    assert np.sum(weights * mags ** 2) == pytest.approx(n * np.sum(x ** 2), rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 300), seed=st.integers(0, 2**32 - 1),
       a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_linearity(n, seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, n))
    X, Y = np.fft.rfft(x), np.fft.rfft(y)
    combined = spectral.dft_magnitudes(seg(a * x + b * y, 100)).magnitudes
    np.testing.assert_allclose(combined, np.abs(a * X + b * Y), rtol=1e-9, atol=1e-9 * (np.abs(X).max() + np.abs(Y).max()))


# --- band selection -------------------------------------------------------

def test_default_band_indices():
    assert 16000 / 320000 == 0.05
    assert spectral.band_indices(16000, 320000, DEFAULT_BAND) == (3320, 14000)


def test_unit_resolution_band():
    assert spectral.band_indices(1000, 1000, BandSpec(166, 400)) == (166, 400)


def test_band_above_nyquist():
    with pytest.raises(InvalidBandError):
        spectral.band_indices(1000, 1000, BandSpec(166, 600))
    with pytest.raises(InvalidBandError):
        BandSpec(700, 166)


def _empty_spectrum(fs=16000, n=320000):
    return Spectrum(np.zeros(n // 2 + 1), fs, n)


def test_full_feature_length():
    fv = spectral.full_features(_empty_spectrum(), DEFAULT_BAND)
    assert len(fv) == 14000 - 3320 + 1 == 10681
    assert fv.center_freqs_hz[0] == pytest.approx(166)
    assert fv.center_freqs_hz[-1] == pytest.approx(700)
    assert not fv.values.any()


def test_one_component_band():
    fv = spectral.full_features(Spectrum(np.arange(501.0), 1000, 1000), BandSpec(200, 200.5))
    assert len(fv) == 1
    assert fv.values[0] == 200


def test_reduced_bin_count_and_reduction_factor():
    assert math.ceil(534 / 15) == 36
    fv = spectral.reduced_features(_empty_spectrum(), DEFAULT_BAND)
    assert len(fv) == 36
    _, _, bins = spectral.bin_assignment(16000, 320000, DEFAULT_BAND)
    counts = np.bincount(bins)
    assert np.all(counts[:-1] == 300)  # 15 Hz / 0.05 Hz
    assert counts[-1] == 181  # 691..700 Hz inclusive
    assert np.all(np.diff(fv.center_freqs_hz) > 0)


def test_reduced_tie_break_lowest_index():
    fv = spectral.reduced_features(Spectrum(np.ones(501), 1000, 1000), BandSpec(100, 130, 10))
    np.testing.assert_allclose(fv.center_freqs_hz, [100, 110, 120])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), width=st.sampled_from([2.0, 5.0, 7.5, 15.0]))
def test_reduced_values_are_bin_maxima(seed, width):
    mags = np.random.default_rng(seed).exponential(size=501)
    band = BandSpec(100, 180, width)
    fv = spectral.reduced_features(Spectrum(mags, 1000, 1000), band)
    k_low, _, bins = spectral.bin_assignment(1000, 1000, band)
    for j, value in enumerate(fv.values):
        members = mags[k_low:][: len(bins)][bins == j]
        assert value == members.max()
        assert value >= members.mean()
        assert value in members


@pytest.mark.parametrize("bin_index", [0, 7, 20, 35])
def test_tone_lands_in_its_bin(bin_index):
    fs, n = 16000, 32000
    f = 166 + 15 * bin_index + 7.5
    t = np.arange(n) / fs
    spec = spectral.dft_magnitudes(AudioSegment(np.sin(2 * np.pi * f * t), fs))
    fv = spectral.reduced_features(spec, DEFAULT_BAND)
    assert int(np.argmax(fv.values)) == bin_index
    assert fv.center_freqs_hz[bin_index] == pytest.approx(f)


def test_degenerate_bins():
    with pytest.raises(DegenerateBinError):
        spectral.reduced_features(Spectrum(np.ones(501), 1000, 1000), BandSpec(100, 200, 0.5))
    with pytest.raises(DegenerateBinError):
        spectral.reduced_features(Spectrum(np.ones(501), 1000, 1000), BandSpec(100, 200, 0))


def test_full_length_extraction_smoke():
    x = np.random.default_rng(0).uniform(-1, 1, 320000)
    s = AudioSegment(x, 16000)
    assert len(spectral.extract(s, DEFAULT_BAND, "full")) == 10681
    assert len(spectral.extract(s, DEFAULT_BAND, "reduced")) == 36


def test_feature_csv(tmp_path):
    segs = [AudioSegment(np.random.default_rng(i).normal(size=2000), 1000) for i in range(3)]
    band = BandSpec(100, 160, 15)
    m = spectral.feature_matrix(segs, band, "reduced")
    freqs = spectral.feature_labels(1000, 2000, band, "reduced")
    spectral.write_feature_csv(tmp_path / "f.csv", m, freqs, [0, 2, 4])
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "start_time_s,107.5,122.5,137.5,152.5"
    assert len(lines) == 4
    assert float(lines[1].split(",")[1]) == m[0, 0]


# --- scaling ----------------------------------------------------------------

def test_scaler_examples():
    sc = Scaler.fit(np.array([[2.0, 5.0], [6.0, 5.0]]))
    np.testing.assert_allclose(sc.apply(np.array([4.0, 9.0])), [0.5, 0.0])
    np.testing.assert_allclose(sc.apply(np.array([10.0, -3.0])), [1.0, 0.0])
    np.testing.assert_allclose(sc.apply(np.array([-10.0, 5.0])), [0.0, 0.0])


def test_scaler_dimension_error():
    sc = Scaler.fit(np.ones((3, 4)))
    with pytest.raises(DimensionError):
        sc.apply(np.ones(5))
