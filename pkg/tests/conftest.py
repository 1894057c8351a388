import wave

import numpy as np
import pytest

from acoustic_power import audio_io, synth

ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def write_pcm16_with_stdlib(path, codes, rate=16000, channels=1):
    """Independent WAV writer (stdlib `wave`) used as an oracle for the reader."""
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(np.asarray(codes, dtype="<i2").tobytes())


@pytest.fixture
def pcm_writer():
    return write_pcm16_with_stdlib


def short_pairs(room, seed, segments=40, segment_s=2.0, shares=None):
    spec = synth.TraceSpec(segments=segments, segment_s=segment_s, shares=shares)
    signal, trace = synth.synth_dataset(synth.FanProfile(), room, spec, seed)
    return audio_io.segment_and_align(signal, trace)


@pytest.fixture(scope="session")
def clean_pairs():
    return short_pairs(synth.RoomProfile(broadband_noise_level=0.05), seed=11, segments=80)
