"""Synthetic server-room audio with a matching power log.

Each segment holds one fan running at a constant speed set by that
segment's wattage. The fan contributes a tone at its blade-pass frequency
(rpm / 60 * blades) plus decaying overtones. Optional extras are low-passed
air-conditioning rumble, white background noise, and a second fixed-speed
fan standing in for a neighbouring tenant.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .audio_io import AudioSignal, PowerTrace, segment_length
from .errors import InvalidInputError, ParseError, SynthesisError

PEAK = 0.99  # headroom so 16-bit quantization never clips
AC_STAGES = 4


def blade_pass_freq(rpm: float, blades: int) -> float:
    return rpm / 60.0 * blades


@dataclass(frozen=True)
class FanProfile:
    blade_count: int = 6
    rpm_min: float = 2000.0
    rpm_max: float = 6000.0
    harmonics: int = 3
    harmonic_decay: float = 0.5
    level: float = 1.0
    # optional (watts, rpm) breakpoints replacing the affine speed curve
    rpm_curve: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.blade_count < 1 or not 0 < self.rpm_min <= self.rpm_max:
            raise InvalidInputError("fan needs blades >= 1 and 0 < rpm_min <= rpm_max")
        if self.harmonics < 0 or not 0 < self.harmonic_decay < 1:
            raise InvalidInputError("harmonics must be >= 0 and harmonic_decay in (0, 1)")


@dataclass(frozen=True)
class Interferer:
    """A neighbouring server's fan at a fixed speed."""

    rpm: float = 3300.0
    blade_count: int = 7
    level: float = 0.8


@dataclass(frozen=True)
class RoomProfile:
    ac_cutoff_hz: float = 200.0
    ac_level: float = 0.0
    broadband_noise_level: float = 0.0
    power_min_w: float = 100.0
    power_max_w: float = 180.0
    interferer: Interferer | None = None

    def __post_init__(self):
        if self.ac_cutoff_hz <= 0 or self.ac_level < 0 or self.broadband_noise_level < 0:
            raise InvalidInputError("room levels must be nonnegative and the AC cutoff positive")
        if not 0 < self.power_min_w < self.power_max_w:
            raise InvalidInputError("room needs 0 < power_min_w < power_max_w")


@dataclass(frozen=True)
class TraceSpec:
    """How wattage evolves across segments.

    ``pattern`` is one of:

    * ``"levels"``: each segment sits at one of `levels` (evenly spaced inside
      the room's power range when omitted) plus uniform +/- `jitter_w`. The
      share of segments per level follows `shares` exactly (then shuffled).
    * ``"random-walk"``: Gaussian steps of `step_w`, reflected at the range edges.
    * ``"script"``: `watts` used verbatim, one per segment.
    """

    segments: int = 8
    segment_s: float = 20.0
    sample_rate_hz: int = 16000
    pattern: str = "levels"
    levels: tuple[float, ...] | None = None
    shares: tuple[float, ...] | None = None
    jitter_w: float | None = None
    step_w: float = 5.0
    watts: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.segments < 1:
            raise InvalidInputError("need at least one segment")
        if self.pattern not in ("levels", "random-walk", "script"):
            raise InvalidInputError(f"unknown wattage pattern {self.pattern!r}")
        if self.pattern == "script" and (self.watts is None or len(self.watts) != self.segments):
            raise InvalidInputError("script pattern needs one wattage per segment")


def power_to_rpm(watts: float, fan: FanProfile, room: RoomProfile) -> float:
    """Fan speed for a load; affine over the room's power range, clamped at its ends."""
    w = min(max(float(watts), room.power_min_w), room.power_max_w)
    if fan.rpm_curve:
        xs, ys = zip(*sorted(fan.rpm_curve))
        return float(np.interp(w, xs, ys))
    frac = (w - room.power_min_w) / (room.power_max_w - room.power_min_w)
    return fan.rpm_min + frac * (fan.rpm_max - fan.rpm_min)


def default_levels(room: RoomProfile, count: int = 4) -> np.ndarray:
    """`count` levels centred in equal slices of the power range."""
    width = (room.power_max_w - room.power_min_w) / count
    return room.power_min_w + width * (np.arange(count) + 0.5)


def _apportion(total: int, shares: np.ndarray) -> np.ndarray:
    """Integer counts proportional to `shares` (largest remainder)."""
    raw = total * shares / shares.sum()
    counts = np.floor(raw).astype(np.int64)
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[: total - counts.sum()]] += 1
    return counts


def wattage_script(spec: TraceSpec, room: RoomProfile, rng: np.random.Generator) -> np.ndarray:
    if spec.pattern == "script":
        return np.asarray(spec.watts, dtype=np.float64)
    if spec.pattern == "random-walk":
        span = room.power_max_w - room.power_min_w
        w = np.empty(spec.segments)
        w[0] = rng.uniform(room.power_min_w, room.power_max_w)
        for i in range(1, spec.segments):
            x = w[i - 1] + rng.normal(0.0, spec.step_w) - room.power_min_w
            x = np.abs(x) % (2 * span)  # reflect into [0, span]
            w[i] = room.power_min_w + (2 * span - x if x > span else x)
        return w
    levels = np.asarray(spec.levels if spec.levels is not None else default_levels(room), dtype=np.float64)
    shares = np.asarray(spec.shares if spec.shares is not None else np.ones(len(levels)), dtype=np.float64)
    if len(shares) != len(levels) or np.any(shares < 0) or shares.sum() <= 0:
        raise InvalidInputError("shares must be nonnegative, one per level")
    spacing = np.min(np.diff(np.sort(levels))) if len(levels) > 1 else 0.0
    jitter = spec.jitter_w if spec.jitter_w is not None else spacing / 4
    picks = np.repeat(np.arange(len(levels)), _apportion(spec.segments, shares))
    rng.shuffle(picks)
    return levels[picks] + rng.uniform(-jitter, jitter, size=spec.segments)


def fan_tone(freq_hz: float, n: int, fs: int, harmonics: int, decay: float, level: float,
             rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / fs
    out = np.zeros(n)
    for h in range(harmonics + 1):
        f = freq_hz * (h + 1)
        if f >= fs / 2:
            break
        out += level * decay ** h * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    return out


def ac_noise(n: int, fs: int, cutoff_hz: float, level: float, rng: np.random.Generator) -> np.ndarray:
    """White noise through cascaded moving averages whose first null sits at or below `cutoff_hz`.

    The result has standard deviation `level` in expectation.
    """
    length = int(np.ceil(fs / cutoff_hz))
    kernel = np.ones(1)
    box = np.ones(length) / length
    for _ in range(AC_STAGES):
        kernel = np.convolve(kernel, box)
    white = rng.standard_normal(n + len(kernel) - 1)
    return level * np.convolve(white, kernel, mode="valid") / np.sqrt(np.sum(kernel ** 2))


def synth_components(watts: float, fan: FanProfile, room: RoomProfile, n: int, fs: int,
                     rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Unnormalized sources for one segment, keyed by name."""
    rpm = power_to_rpm(watts, fan, room)
    parts = {"fan": fan_tone(blade_pass_freq(rpm, fan.blade_count), n, fs,
                             fan.harmonics, fan.harmonic_decay, fan.level, rng)}
    if room.ac_level > 0:
        parts["ac"] = ac_noise(n, fs, room.ac_cutoff_hz, room.ac_level, rng)
    if room.broadband_noise_level > 0:
        parts["broadband"] = room.broadband_noise_level * rng.standard_normal(n)
    if room.interferer is not None:
        other = room.interferer
        parts["interferer"] = fan_tone(blade_pass_freq(other.rpm, other.blade_count), n, fs,
                                       fan.harmonics, fan.harmonic_decay, other.level, rng)
    return parts


def synth_dataset(fan: FanProfile, room: RoomProfile, spec: TraceSpec,
                  seed: int) -> tuple[AudioSignal, PowerTrace]:
    """Audio plus power log; bit-for-bit reproducible from `seed`.

    Each segment draws from its own child of the seed, so segments could be
    rendered independently. The whole recording is scaled to a common peak.
    """
    n = segment_length(spec.sample_rate_hz, spec.segment_s)
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(spec.segments + 1)]
    watts = wattage_script(spec, room, streams[0])
    audio = np.concatenate([
        sum(synth_components(w, fan, room, n, spec.sample_rate_hz, rng).values())
        for w, rng in zip(watts, streams[1:])
    ])
    peak = np.max(np.abs(audio))
    if peak > 0:
        audio *= PEAK / peak
    if not np.all(np.abs(audio) <= 1.0):
        raise SynthesisError("synthesized audio clips after normalization")
    trace = PowerTrace.uniform(watts, spec.segment_s)
    return AudioSignal(audio, spec.sample_rate_hz), trace


# --------------------------------------------------------------------------
# scenario files

@dataclass(frozen=True)
class Scenario:
    fan: FanProfile = field(default_factory=FanProfile)
    room: RoomProfile = field(default_factory=RoomProfile)
    trace: TraceSpec = field(default_factory=TraceSpec)
    seed: int = 0

    def render(self) -> tuple[AudioSignal, PowerTrace]:
        return synth_dataset(self.fan, self.room, self.trace, self.seed)

    def to_dict(self) -> dict:
        return asdict(self)


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a scenario from a nested mapping with optional ``fan``, ``room``, ``trace``, ``seed`` keys."""
    try:
        fan = FanProfile(**{k: _tuplify(v) for k, v in doc.get("fan", {}).items()})
        room_doc = dict(doc.get("room", {}))
        if room_doc.get("interferer") is not None:
            room_doc["interferer"] = Interferer(**room_doc["interferer"])
        room = RoomProfile(**room_doc)
        trace = TraceSpec(**{k: _tuplify(v) for k, v in doc.get("trace", {}).items()})
    except TypeError as exc:
        raise InvalidInputError(f"bad scenario: {exc}") from None
    return Scenario(fan, room, trace, int(doc.get("seed", 0)))


def load_scenario(path: str | os.PathLike) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
    return scenario_from_dict(doc)

