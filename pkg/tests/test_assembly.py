import os

import numpy as np
import pytest
from hypothesis import given, strategies as st

from prosogap.assembly import (
    CrossfadeSpec,
    Waveform,
    crossfade_concat,
    mock_vocode,
    read_wav,
    write_wav,
)
from prosogap.errors import ChunkTooShort, ClippedInput, RateMismatch
from prosogap.synth import FrameParams, PhonemeRecord


def _wave(values, rate=22050):
    return Waveform(samples=np.asarray(values, dtype=np.float64), sample_rate=rate)


# --- mock vocoder


def test_vocode_emits_sine_at_phoneme_pitch():
    params = FrameParams()
    rec = PhonemeRecord("A", 0, 10, 440.0, 0.5)
    wave = mock_vocode([rec], params)
    assert len(wave) == 10 * params.hop_samples
    step = 2 * np.pi * 440.0 / params.sample_rate
    expected = 0.5 * np.sin(step * np.arange(len(wave)))
    np.testing.assert_allclose(wave.samples, expected, atol=1e-12)


def test_vocode_amplitude_clamped_to_one():
    rec = PhonemeRecord("A", 0, 2, 100.0, 7.5)
    wave = mock_vocode([rec])
    assert np.max(np.abs(wave.samples)) <= 1.0


def test_vocode_zero_pitch_is_silent_and_freezes_phase():
    recs = [
        PhonemeRecord("A", 0, 4, 200.0, 0.5),
        PhonemeRecord("B", 0, 3, 0.0, 0.9),
        PhonemeRecord("C", 0, 4, 200.0, 0.5),
    ]
    wave = mock_vocode(recs)
    hop = FrameParams().hop_samples
    silent = wave.samples[4 * hop : 7 * hop]
    assert np.all(silent == 0.0)
    # Phase frozen: the resumed sine continues as if the silence never
    # happened sample-wise; sample 7*hop equals what a contiguous 200 Hz
    # sine would emit at index 4*hop.
    step = 2 * np.pi * 200.0 / 22050
    expected = 0.5 * np.sin(step * (4 * hop))
    assert wave.samples[7 * hop] == pytest.approx(expected, abs=1e-12)


def test_vocode_phase_continuous_across_pitch_change():
    recs = [
        PhonemeRecord("A", 0, 5, 150.0, 0.8),
        PhonemeRecord("B", 0, 5, 310.0, 0.8),
    ]
    wave = mock_vocode(recs)
    # No jump larger than the steepest slope of the higher sine.
    max_step = 0.8 * 2 * np.pi * 310.0 / 22050 * 1.01
    assert np.max(np.abs(np.diff(wave.samples))) <= max_step


def test_vocode_requires_phonemes():
    with pytest.raises(ValueError):
        mock_vocode([])


# --- crossfade


def test_fade_samples_one_ms_at_22050():
    assert CrossfadeSpec(duration_ms=1.0).fade_samples(22050) == 22
    assert CrossfadeSpec(duration_ms=0.0).fade_samples(22050) == 0
    assert CrossfadeSpec(duration_ms=1.0).fade_samples(16000) == 16


def test_crossfade_output_length_formula():
    spec = CrossfadeSpec(duration_ms=1.0)
    fade = spec.fade_samples(22050)
    for lengths in [(100, 100), (22, 22), (50, 100, 75), (200,)]:
        chunks = [_wave(np.zeros(n)) for n in lengths]
        out = crossfade_concat(chunks, spec)
        assert len(out) == sum(lengths) - (len(lengths) - 1) * fade


def test_crossfade_preserves_constant_signals_exactly():
    chunks = [_wave(np.full(60, 0.5)), _wave(np.full(80, 0.5)), _wave(np.full(40, 0.5))]
    out = crossfade_concat(chunks, CrossfadeSpec(duration_ms=1.0))
    assert np.all(out.samples == 0.5)


def test_crossfade_weights_are_interior():
    # Fade of 3 samples between constant 0 and constant 1: weights are
    # 1/4, 2/4, 3/4 -- never 0 or 1, so both ends contribute everywhere.
    a = _wave(np.zeros(10), rate=3000)
    b = _wave(np.ones(10), rate=3000)
    out = crossfade_concat([a, b], CrossfadeSpec(duration_ms=1.0))  # 3 samples
    joint = out.samples[7:10]
    np.testing.assert_allclose(joint, [0.25, 0.5, 0.75], atol=1e-15)
    assert len(out) == 17


def test_crossfade_zero_duration_is_plain_concat():
    a = _wave([1.0, -1.0])
    b = _wave([0.5])
    out = crossfade_concat([a, b], CrossfadeSpec(duration_ms=0.0))
    np.testing.assert_array_equal(out.samples, [1.0, -1.0, 0.5])


def test_crossfade_rejects_mixed_rates():
    with pytest.raises(RateMismatch):
        crossfade_concat([_wave(np.zeros(50), 22050), _wave(np.zeros(50), 16000)])


def test_crossfade_rejects_short_chunks():
    with pytest.raises(ChunkTooShort):
        crossfade_concat([_wave(np.zeros(10)), _wave(np.zeros(50))])


def test_crossfade_single_chunk_passthrough():
    a = _wave(np.linspace(-1, 1, 64))
    out = crossfade_concat([a])
    np.testing.assert_array_equal(out.samples, a.samples)


@given(
    st.lists(
        st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=22, max_size=60),
        min_size=1,
        max_size=4,
    )
)
def test_crossfade_never_exceeds_input_peak(chunk_values):
    chunks = [_wave(v) for v in chunk_values]
    out = crossfade_concat(chunks, CrossfadeSpec(duration_ms=1.0))
    peak_in = max(float(np.max(np.abs(c.samples))) for c in chunks)
    assert float(np.max(np.abs(out.samples))) <= peak_in + 1e-12


# --- WAV files


def test_wav_roundtrip_error_within_quantization(tmp_path):
    rate = 22050
    t = np.arange(4410)
    samples = 0.9 * np.sin(2 * np.pi * 220.0 * t / rate)
    path = tmp_path / "tone.wav"
    write_wav(Waveform(samples, rate), path)
    loaded = read_wav(path)
    assert loaded.sample_rate == rate
    assert len(loaded) == len(samples)
    assert float(np.max(np.abs(loaded.samples - samples))) <= 1.0 / 32767


def test_wav_full_scale_survives(tmp_path):
    samples = np.array([1.0, -1.0, 0.0])
    path = tmp_path / "full.wav"
    write_wav(Waveform(samples, 8000), path)
    loaded = read_wav(path)
    np.testing.assert_allclose(loaded.samples, samples, atol=1.0 / 32767)
    assert float(np.max(np.abs(loaded.samples))) <= 1.0


def test_wav_rejects_clipped_input(tmp_path):
    path = tmp_path / "clip.wav"
    with pytest.raises(ClippedInput):
        write_wav(Waveform(np.array([0.0, 1.5]), 8000), path)
    assert not path.exists()


def test_wav_empty_roundtrip(tmp_path):
    path = tmp_path / "empty.wav"
    write_wav(Waveform(np.zeros(0), 8000), path)
    loaded = read_wav(path)
    assert len(loaded) == 0


def test_wav_write_leaves_no_temp_files(tmp_path):
    path = tmp_path / "clean.wav"
    write_wav(Waveform(np.zeros(16), 8000), path)
    leftovers = [p for p in os.listdir(tmp_path) if p != "clean.wav"]
    assert leftovers == []


def test_waveform_validation():
    with pytest.raises(ValueError):
        Waveform(np.zeros((2, 2)), 22050)
    with pytest.raises(ValueError):
        Waveform(np.zeros(4), 0)
