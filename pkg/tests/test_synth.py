import json

import numpy as np
import pytest

from acoustic_power import audio_io, spectral, synth
from acoustic_power.audio_io import AudioSegment
from acoustic_power.errors import InvalidInputError, ParseError
from acoustic_power.synth import FanProfile, Interferer, RoomProfile, TraceSpec


@pytest.mark.parametrize("rpm, blades, hz", [(3000, 6, 300.0), (2000, 5, 2000 * 5 / 60), (6000, 7, 700.0)])
def test_blade_pass_frequency(rpm, blades, hz):
    assert synth.blade_pass_freq(rpm, blades) == pytest.approx(hz, rel=1e-12)


def test_power_to_rpm():
    fan, room = FanProfile(), RoomProfile()
    assert synth.power_to_rpm(100, fan, room) == 2000
    assert synth.power_to_rpm(180, fan, room) == 6000
    assert synth.power_to_rpm(140, fan, room) == 4000
    assert synth.power_to_rpm(20, fan, room) == 2000
    rpms = [synth.power_to_rpm(w, fan, room) for w in np.linspace(90, 190, 101)]
    assert np.all(np.diff(rpms) >= 0)


def test_rpm_curve_breakpoints():
    fan = FanProfile(rpm_curve=((100.0, 1000.0), (140.0, 1200.0), (180.0, 3000.0)))
    assert synth.power_to_rpm(120, fan, RoomProfile()) == 1100


def test_ac_noise_is_low_frequency():
    rng = np.random.default_rng(0)
    x = synth.ac_noise(320000, 16000, 200.0, 1.0, rng)
    power = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(len(x), 1 / 16000)
    assert power[freqs < 200].sum() / power.sum() >= 0.99
    assert np.std(x) == pytest.approx(1.0, rel=0.1)


def test_tone_lands_in_expected_bin():
    fs, n = 16000, 32000
    x = synth.fan_tone(300.0, n, fs, 0, 0.5, 1.0, np.random.default_rng(1))
    fv = spectral.extract(AudioSegment(x, fs), spectral.BandSpec(), "reduced")
    assert int(np.argmax(fv.values)) == int((300 - 166) // 15)


def test_determinism_and_seed_sensitivity():
    spec = TraceSpec(segments=3, segment_s=1.0)
    room = RoomProfile(ac_level=0.5, broadband_noise_level=0.1, interferer=Interferer())
    a, ta = synth.synth_dataset(FanProfile(), room, spec, 5)
    b, tb = synth.synth_dataset(FanProfile(), room, spec, 5)
    c, _ = synth.synth_dataset(FanProfile(), room, spec, 6)
    assert a.samples.tobytes() == b.samples.tobytes()
    np.testing.assert_array_equal(ta.watts, tb.watts)
    assert not np.array_equal(a.samples, c.samples)


def test_peak_normalization_and_shape():
    spec = TraceSpec(segments=4, segment_s=0.5)
    signal, trace = synth.synth_dataset(FanProfile(), RoomProfile(broadband_noise_level=0.3), spec, 0)
    assert len(signal.samples) == 4 * 8000
    assert np.max(np.abs(signal.samples)) == pytest.approx(synth.PEAK)
    assert len(trace) == 4
    np.testing.assert_allclose(trace.timestamps_s, [0, 0.5, 1.0, 1.5])


def test_energy_budget():
    fan = FanProfile()
    room = RoomProfile(ac_level=0.7, broadband_noise_level=0.2, interferer=Interferer())
    n, fs = 16000 * 20, 16000
    parts = synth.synth_components(140.0, fan, room, n, fs, np.random.default_rng(3))
    expected = {
        "fan": 0.5 * sum(0.25 ** h for h in range(4)),
        "ac": 0.49,
        "broadband": 0.04,
        "interferer": 0.5 * 0.64 * sum(0.25 ** h for h in range(4)),
    }
    for name, value in expected.items():
        assert np.mean(parts[name] ** 2) == pytest.approx(value, rel=0.1 if name == "ac" else 0.01), name
    total = sum(parts.values())
    assert np.mean(total ** 2) == pytest.approx(sum(expected.values()), rel=0.1)


def test_levels_pattern_shares():
    room = RoomProfile()
    spec = TraceSpec(segments=100, shares=(0.1, 0.2, 0.3, 0.4))
    w = synth.wattage_script(spec, room, np.random.default_rng(0))
    counts = [np.sum(np.abs(w - lvl) <= 5) for lvl in synth.default_levels(room)]
    assert counts == [10, 20, 30, 40]


def test_random_walk_stays_in_range():
    room = RoomProfile()
    spec = TraceSpec(segments=500, pattern="random-walk", step_w=30.0)
    w = synth.wattage_script(spec, room, np.random.default_rng(0))
    assert np.all((w >= room.power_min_w) & (w <= room.power_max_w))


def test_script_pattern_needs_one_value_per_segment():
    with pytest.raises(InvalidInputError):
        TraceSpec(segments=3, pattern="script", watts=(100.0, 120.0))


def test_classes_are_separable_without_noise():
    """Each level's blade-pass tone falls in a different reduced bin."""
    room = RoomProfile()
    spec = TraceSpec(segments=8, segment_s=2.0, jitter_w=0.0)
    signal, trace = synth.synth_dataset(FanProfile(), room, spec, 2)
    pairs = audio_io.segment_and_align(signal, trace)
    peaks = {}
    for seg, w in pairs:
        fv = spectral.extract(seg, spectral.BandSpec(), "reduced")
        peaks.setdefault(round(w), set()).add(int(np.argmax(fv.values)))
    assert all(len(v) == 1 for v in peaks.values())
    assert len(set().union(*peaks.values())) == 4


def test_wav_roundtrip_quantization(tmp_path):
    spec = TraceSpec(segments=2, segment_s=1.0)
    signal, _ = synth.synth_dataset(FanProfile(), RoomProfile(broadband_noise_level=0.2), spec, 1)
    audio_io.write_wav(tmp_path / "a.wav", signal)
    back = audio_io.read_wav(tmp_path / "a.wav")
    assert np.max(np.abs(back.samples - signal.samples)) <= 1 / 32768


def test_scenario_file(tmp_path):
    doc = {
        "seed": 4,
        "fan": {"blade_count": 5},
        "room": {"ac_level": 0.3, "interferer": {"rpm": 3000}},
        "trace": {"segments": 2, "segment_s": 0.5, "levels": [110, 170]},
    }
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    scenario = synth.load_scenario(path)
    assert scenario.fan.blade_count == 5
    assert scenario.room.interferer == Interferer(rpm=3000)
    assert scenario.trace.levels == (110, 170)
    signal, trace = scenario.render()
    assert len(trace) == 2
    again = synth.scenario_from_dict(json.loads(json.dumps(scenario.to_dict())))
    assert again == scenario


def test_bad_scenario(tmp_path):
    (tmp_path / "a.json").write_text("{not json")
    with pytest.raises(ParseError):
        synth.load_scenario(tmp_path / "a.json")
    with pytest.raises(InvalidInputError):
        synth.scenario_from_dict({"fan": {"blade_cnt": 3}})
