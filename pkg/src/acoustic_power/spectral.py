"""DFT magnitude features over the fan-noise band.

Two feature layouts are produced from the same spectrum:

* ``full``    every DFT component between the band edges;
* ``reduced`` the band cut into fixed-width sub-regions, each represented by
  its largest component.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .audio_io import AudioSegment
from .errors import DegenerateBinError, DimensionError, InvalidBandError, InvalidInputError

APPROACHES = ("full", "reduced")


@dataclass(frozen=True)
class Spectrum:
    magnitudes: np.ndarray
    sample_rate_hz: int
    n: int

    @property
    def freq_resolution_hz(self) -> float:
        return self.sample_rate_hz / self.n


@dataclass(frozen=True)
class BandSpec:
    low_hz: float = 166.0
    high_hz: float = 700.0
    bin_width_hz: float = 15.0

    def __post_init__(self):
        if not (0 < self.low_hz < self.high_hz):
            raise InvalidBandError(f"band needs 0 < low < high, got {self.low_hz:g}-{self.high_hz:g} Hz")
        if self.bin_width_hz < 0:
            raise InvalidBandError("bin width must be nonnegative")

    @classmethod
    def parse(cls, text: str, bin_width_hz: float = 15.0) -> "BandSpec":
        """Build a band from ``"LOW:HIGH"``."""
        try:
            low, high = (float(part) for part in text.split(":"))
        except ValueError:
            raise InvalidBandError(f"band must look like LOW:HIGH, got {text!r}") from None
        return cls(low, high, bin_width_hz)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    center_freqs_hz: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


def dft_magnitudes(segment: AudioSegment, taper: bool = False) -> Spectrum:
    """|X_k| for k = 0..N//2 of the segment's DFT.

    No window is applied unless `taper` is set, in which case a Hann taper
    multiplies the samples first.
    """
    x = np.asarray(segment.samples, dtype=np.float64)
    if x.size < 2:
        raise InvalidInputError("need at least two samples for a spectrum")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("segment contains non-finite samples")
    if taper:
        x = x * np.hanning(x.size)
    return Spectrum(np.abs(np.fft.rfft(x)), int(segment.sample_rate_hz), x.size)


def band_indices(sample_rate_hz: float, n: int, band: BandSpec) -> tuple[int, int]:
    """Inclusive DFT index range covering the band.

    Computed with integer arithmetic where possible so that, e.g., 166 Hz at
    0.05 Hz resolution gives exactly 3320 rather than a rounding neighbour.
    """
    nyquist = sample_rate_hz / 2
    if band.high_hz > nyquist:
        raise InvalidBandError(f"band top {band.high_hz:g} Hz is above Nyquist ({nyquist:g} Hz)")
    # k = f / df = f * n / fs
    k_low = math.ceil(_ratio(band.low_hz * n, sample_rate_hz))
    k_high = math.floor(_ratio(band.high_hz * n, sample_rate_hz))
    if k_high < k_low:
        raise InvalidBandError(
            f"band {band.low_hz:g}-{band.high_hz:g} Hz contains no DFT component at "
            f"{sample_rate_hz / n:g} Hz resolution"
        )
    return k_low, k_high


def _ratio(num: float, den: float) -> float:
    # snap values within float noise of an integer, so ceil/floor stay exact
    q = num / den
    r = round(q)
    return float(r) if math.isclose(q, r, rel_tol=1e-12, abs_tol=1e-9) else q


def full_features(spectrum: Spectrum, band: BandSpec) -> FeatureVector:
    k_low, k_high = band_indices(spectrum.sample_rate_hz, spectrum.n, band)
    k = np.arange(k_low, k_high + 1)
    return FeatureVector(spectrum.magnitudes[k_low:k_high + 1].copy(), k * spectrum.freq_resolution_hz)


def bin_count(band: BandSpec) -> int:
    return math.ceil(_ratio(band.high_hz - band.low_hz, band.bin_width_hz))


def bin_assignment(sample_rate_hz: float, n: int, band: BandSpec) -> tuple[int, int, np.ndarray]:
    """Sub-region index of every in-band DFT component.

    Returns ``(k_low, k_high, bins)`` with ``bins[i]`` the sub-region holding
    component ``k_low + i``.
    """
    if band.bin_width_hz <= 0:
        raise DegenerateBinError("reduced features need a positive bin width")
    df = sample_rate_hz / n
    if band.bin_width_hz < df:
        raise DegenerateBinError(
            f"bin width {band.bin_width_hz:g} Hz is narrower than the {df:g} Hz DFT resolution"
        )
    k_low, k_high = band_indices(sample_rate_hz, n, band)
    k = np.arange(k_low, k_high + 1, dtype=np.float64)
    # (k*df - low) / w, kept in a form that is exact for integer-valued inputs
    pos = (k * sample_rate_hz - band.low_hz * n) / (band.bin_width_hz * n)
    bins = np.floor(pos + 1e-12).astype(np.int64)
    n_bins = bin_count(band)
    bins = np.clip(bins, 0, n_bins - 1)
    occupied = np.bincount(bins, minlength=n_bins)
    if np.any(occupied == 0):
        empty = int(np.flatnonzero(occupied == 0)[0])
        raise DegenerateBinError(f"sub-region {empty} of the band contains no DFT component")
    return k_low, k_high, bins


def reduced_features(spectrum: Spectrum, band: BandSpec) -> FeatureVector:
    """Max-magnitude representative of each `bin_width_hz` sub-region.

    Ties resolve to the lowest-index component; `center_freqs_hz` holds the
    frequency of each chosen component.
    """
    k_low, k_high, bins = bin_assignment(spectrum.sample_rate_hz, spectrum.n, band)
    mags = spectrum.magnitudes[k_low:k_high + 1]
    starts = np.flatnonzero(np.r_[True, np.diff(bins) != 0])
    # argmax returns the first maximum, which is the lowest index
    winners = np.array([s + int(np.argmax(seg)) for s, seg in zip(starts, np.split(mags, starts[1:]))])
    return FeatureVector(mags[winners].copy(), (k_low + winners) * spectrum.freq_resolution_hz)


def nominal_bin_centers(band: BandSpec) -> np.ndarray:
    """Midpoints of the sub-regions, the last one truncated at the band top."""
    edges = band.low_hz + band.bin_width_hz * np.arange(bin_count(band) + 1)
    edges[-1] = band.high_hz
    return 0.5 * (edges[:-1] + edges[1:])


def extract(segment: AudioSegment, band: BandSpec, approach: str, taper: bool = False) -> FeatureVector:
    spectrum = dft_magnitudes(segment, taper=taper)
    if approach == "full":
        return full_features(spectrum, band)
    if approach == "reduced":
        return reduced_features(spectrum, band)
    raise InvalidInputError(f"unknown approach {approach!r}; expected one of {APPROACHES}")


def feature_matrix(segments: Sequence[AudioSegment], band: BandSpec, approach: str,
                   taper: bool = False) -> np.ndarray:
    if not segments:
        return np.empty((0, 0))
    return np.vstack([extract(s, band, approach, taper).values for s in segments])


def feature_labels(sample_rate_hz: int, n: int, band: BandSpec, approach: str) -> np.ndarray:
    """Column frequencies for a feature matrix (component or nominal bin centre)."""
    if approach == "full":
        k_low, k_high = band_indices(sample_rate_hz, n, band)
        return np.arange(k_low, k_high + 1) * (sample_rate_hz / n)
    bin_assignment(sample_rate_hz, n, band)
    return nominal_bin_centers(band)


def write_feature_csv(path: str | os.PathLike, matrix: np.ndarray, freqs_hz: np.ndarray,
                      start_times_s: Sequence[float] | None = None) -> None:
    """One row per segment; the header lists column frequencies in Hz."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        lead = ["start_time_s"] if start_times_s is not None else []
        writer.writerow(lead + [f"{f:.6g}" for f in freqs_hz])
        for i, row in enumerate(matrix):
            prefix = [repr(float(start_times_s[i]))] if start_times_s is not None else []
            writer.writerow(prefix + [repr(float(v)) for v in row])


class Scaler:
    """Per-dimension min-max scaling onto [0, 1], fit on training rows only."""

    def __init__(self, minimum: np.ndarray, maximum: np.ndarray):
        self.minimum = np.asarray(minimum, dtype=np.float64)
        self.maximum = np.asarray(maximum, dtype=np.float64)

    @classmethod
    def fit(cls, train: np.ndarray) -> "Scaler":
        train = np.atleast_2d(np.asarray(train, dtype=np.float64))
        if train.shape[0] == 0:
            raise InvalidInputError("cannot fit a scaler on an empty training set")
        return cls(train.min(axis=0), train.max(axis=0))

    def __len__(self) -> int:
        return len(self.minimum)

    def apply(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.shape[-1] != len(self):
            raise DimensionError(f"scaler expects {len(self)} features, got {x.shape[-1]}")
        span = self.maximum - self.minimum
        live = span > 0
        out = np.zeros_like(x)
        out[..., live] = (x[..., live] - self.minimum[live]) / span[live]
        return np.clip(out, 0.0, 1.0)

    def __eq__(self, other):
        if not isinstance(other, Scaler):
            return NotImplemented
        return np.array_equal(self.minimum, other.minimum) and np.array_equal(self.maximum, other.maximum)


def fit_feature_scaler(train_features: np.ndarray) -> Scaler:
    return Scaler.fit(train_features)


def apply_scaler(scaler: Scaler, features: np.ndarray) -> np.ndarray:
    return scaler.apply(features)
