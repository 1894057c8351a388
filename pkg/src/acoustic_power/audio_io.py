"""WAV / power-trace ingestion and segment alignment.

Only two sample encodings are handled: 16-bit integer PCM and 32-bit IEEE
float. Multichannel audio is averaged down to mono.
"""
from __future__ import annotations

import csv
import logging
import math
import os
import struct
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    EmptyInputError,
    InvalidInputError,
    ParseError,
    UnsupportedFormatError,
)

log = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

# relative tolerance on the spacing between consecutive power readings
SPACING_TOLERANCE = 0.01


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidInputError("audio samples must be one-dimensional")
        if int(self.sample_rate_hz) <= 0:
            raise InvalidInputError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("audio samples must be finite")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class AudioSegment:
    samples: np.ndarray
    sample_rate_hz: int
    start_time_s: float = 0.0

    @property
    def n(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class PowerTrace:
    timestamps_s: np.ndarray
    watts: np.ndarray
    interval_s: float

    def __len__(self) -> int:
        return len(self.watts)

    @classmethod
    def uniform(cls, watts: Sequence[float], interval_s: float = 20.0, start_s: float = 0.0) -> "PowerTrace":
        watts = np.asarray(watts, dtype=np.float64)
        timestamps = start_s + interval_s * np.arange(len(watts), dtype=np.float64)
        return cls(timestamps, watts, float(interval_s))


# --------------------------------------------------------------------------
# WAV

def _iter_chunks(data: bytes) -> Iterator[tuple[bytes, int, int]]:
    """Yield (chunk id, payload offset, payload size) for each RIFF sub-chunk."""
    offset = 12
    while offset < len(data):
        if offset + 8 > len(data):
            raise ParseError(f"truncated chunk header at byte offset {offset}")
        chunk_id, size = struct.unpack_from("<4sI", data, offset)
        start = offset + 8
        if start + size > len(data):
            # tolerate a data chunk whose declared size overruns the file
            if chunk_id == b"data":
                size = len(data) - start
            else:
                raise ParseError(f"chunk {chunk_id!r} at byte offset {offset} overruns the file")
        yield chunk_id, start, size
        offset = start + size + (size & 1)


def read_wav(path: str | os.PathLike) -> AudioSignal:
    """Read a RIFF/WAVE file into a mono signal normalized to [-1, 1].

    Integer PCM is scaled by 1/32768, so -32768 maps to exactly -1.0.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12:
        raise ParseError(f"{path}: file too short for a RIFF header (byte offset {len(data)})")
    riff, _, wave_id = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF":
        raise ParseError(f"{path}: missing RIFF tag at byte offset 0")
    if wave_id != b"WAVE":
        raise ParseError(f"{path}: missing WAVE tag at byte offset 8")

    fmt = None
    payload = None
    for chunk_id, start, size in _iter_chunks(data):
        if chunk_id == b"fmt ":
            if size < 16:
                raise ParseError(f"{path}: fmt chunk too small at byte offset {start - 8}")
            fmt = struct.unpack_from("<HHIIHH", data, start)
            if fmt[0] == WAVE_FORMAT_EXTENSIBLE:
                if size < 40:
                    raise ParseError(f"{path}: extensible fmt chunk too small at byte offset {start - 8}")
                # first two bytes of the sub-format GUID hold the real format tag
                sub_tag = struct.unpack_from("<H", data, start + 24)[0]
                fmt = (sub_tag,) + fmt[1:]
        elif chunk_id == b"data":
            payload = data[start:start + size]
    if fmt is None:
        raise ParseError(f"{path}: no fmt chunk found")
    if payload is None:
        raise ParseError(f"{path}: no data chunk found")

    tag, channels, rate, _, block_align, bits = fmt
    if channels < 1 or rate < 1:
        raise ParseError(f"{path}: invalid channel count or sample rate in fmt chunk")
    if tag == WAVE_FORMAT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedFormatError(
            f"{path}: unsupported encoding (format tag {tag:#06x}, {bits} bits); "
            "only 16-bit PCM and 32-bit float are read"
        )
    frame_bytes = channels * dtype.itemsize
    n_frames = len(payload) // frame_bytes
    if n_frames == 0:
        raise EmptyInputError(f"{path}: data chunk holds no samples")

    raw = np.frombuffer(payload[: n_frames * frame_bytes], dtype=dtype)
    samples = raw.astype(np.float64) * scale
    if channels > 1:
        log.warning("%s: averaging %d channels to mono", path, channels)
        samples = samples.reshape(n_frames, channels).mean(axis=1)
    if tag == WAVE_FORMAT_IEEE_FLOAT:
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError(f"{path}: non-finite float samples")
        samples = np.clip(samples, -1.0, 1.0)
    return AudioSignal(samples, rate)


def quantize_pcm16(samples: np.ndarray) -> np.ndarray:
    """Map [-1, 1] amplitudes onto int16 codes; the inverse of the read scaling."""
    codes = np.round(np.asarray(samples, dtype=np.float64) * 32768.0)
    return np.clip(codes, -32768, 32767).astype("<i2")


def write_wav(path: str | os.PathLike, signal: AudioSignal, encoding: str = "pcm16") -> None:
    """Write a mono WAV. `encoding` is ``"pcm16"`` or ``"float32"``."""
    if encoding == "pcm16":
        payload = quantize_pcm16(signal.samples).tobytes()
        tag, bits = WAVE_FORMAT_PCM, 16
    elif encoding == "float32":
        payload = np.asarray(signal.samples, dtype="<f4").tobytes()
        tag, bits = WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise UnsupportedFormatError(f"unknown WAV encoding {encoding!r}")
    block_align = bits // 8
    fmt = struct.pack("<HHIIHH", tag, 1, signal.sample_rate_hz,
                      signal.sample_rate_hz * block_align, block_align, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", len(body)) + body)


# --------------------------------------------------------------------------
# power CSV

def _parse_row(row: list[str], row_number: int) -> list[float]:
    try:
        return [float(field) for field in row]
    except ValueError:
        raise ParseError(f"row {row_number}: non-numeric field in {row!r}") from None


def read_power_csv(path: str | os.PathLike, interval_s: float | None = None) -> PowerTrace:
    """Parse a power log with columns ``timestamp_s,watts`` or a single ``watts`` column.

    A header row is optional. Single-column files get timestamps synthesized at
    `interval_s` (20 s when not given). Two-column files infer the interval from
    the first two timestamps and reject spacing that deviates by more than 1%.
    """
    rows: list[list[float]] = []
    seen_first = False
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            row = [field.strip() for field in row if field.strip() != ""]
            if not row:
                continue
            if not seen_first:
                seen_first = True
                try:
                    rows.append(_parse_row(row, i))
                except ParseError:
                    pass  # header
                continue
            rows.append(_parse_row(row, i))
    if not rows:
        raise EmptyInputError(f"{path}: no power readings")

    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() not in (1, 2):
        raise ParseError(f"{path}: expected 1 or 2 columns per row")
    table = np.asarray(rows, dtype=np.float64)

    if table.shape[1] == 1:
        interval = 20.0 if interval_s is None else float(interval_s)
        if interval <= 0:
            raise InvalidInputError("interval must be positive")
        trace = PowerTrace.uniform(table[:, 0], interval)
    else:
        timestamps, watts = table[:, 0], table[:, 1]
        if len(timestamps) == 1:
            interval = 20.0 if interval_s is None else float(interval_s)
        else:
            steps = np.diff(timestamps)
            interval = float(steps[0])
            if interval <= 0 or np.any(steps <= 0):
                raise AlignmentError(f"{path}: timestamps must be strictly increasing")
            bad = np.flatnonzero(np.abs(steps - interval) > SPACING_TOLERANCE * interval)
            if bad.size:
                j = int(bad[0])
                raise AlignmentError(
                    f"{path}: non-uniform spacing {steps[j]:g} s between readings {j + 1} and {j + 2} "
                    f"(expected {interval:g} s)"
                )
        trace = PowerTrace(timestamps, watts, interval)

    if np.any(trace.timestamps_s < 0):
        raise InvalidInputError(f"{path}: negative timestamp")
    if not np.all(np.isfinite(trace.watts)) or np.any(trace.watts <= 0):
        raise InvalidInputError(f"{path}: wattage must be finite and positive")
    return trace


def write_power_csv(path: str | os.PathLike, trace: PowerTrace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp_s", "watts"])
        for t, w in zip(trace.timestamps_s, trace.watts):
            writer.writerow([repr(float(t)), repr(float(w))])


# --------------------------------------------------------------------------
# alignment

def segment_length(sample_rate_hz: int, duration_s: float) -> int:
    n = sample_rate_hz * duration_s
    if not math.isclose(n, round(n), rel_tol=0, abs_tol=1e-6) or round(n) < 1:
        raise AlignmentError(
            f"{duration_s:g} s at {sample_rate_hz} Hz is not a whole number of samples"
        )
    return int(round(n))


def segment_signal(signal: AudioSignal, duration_s: float, offset_s: float = 0.0) -> list[AudioSegment]:
    """Cut a signal into consecutive, non-overlapping full-length segments."""
    if offset_s < 0:
        raise InvalidInputError("offset must be nonnegative")
    n = segment_length(signal.sample_rate_hz, duration_s)
    start = int(round(offset_s * signal.sample_rate_hz))
    count = max(0, (len(signal.samples) - start) // n)
    return [
        AudioSegment(signal.samples[start + k * n: start + (k + 1) * n],
                     signal.sample_rate_hz,
                     start / signal.sample_rate_hz + k * duration_s)
        for k in range(count)
    ]


def segment_and_align(signal: AudioSignal, trace: PowerTrace,
                      offset_s: float = 0.0) -> list[tuple[AudioSegment, float]]:
    """Pair the k-th `interval_s` window of audio with the k-th power reading.

    `offset_s` is where, in the recording, the first power interval begins.
    Trailing partial audio and surplus readings are dropped.
    """
    segments = segment_signal(signal, trace.interval_s, offset_s)
    count = min(len(segments), len(trace))
    if count == 0:
        raise EmptyInputError(
            f"no full {trace.interval_s:g} s segment in {signal.duration_s:g} s of audio"
            if not segments else "power trace has no readings"
        )
    return [(segments[k], float(trace.watts[k])) for k in range(count)]
