"""Waveform assembly: mock vocoder, crossfade concatenation, WAV files.

Incrementally synthesized words arrive as separate waveforms and are glued
with a short equal-gain linear crossfade, like the 1 ms joins used when
splicing re-synthesized words into a carrier sentence.
"""

from __future__ import annotations

import os
import tempfile
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Optional, Sequence

import numpy as np
import requests

from .errors import (
    BackendUnavailable,
    ChunkTooShort,
    ClippedInput,
    RateMismatch,
)
from .synth import FrameParams, PhonemeRecord

_PCM_SCALE = 32767.0


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray  # 1-D float64 in [-1, 1]
    sample_rate: int

    def __post_init__(self) -> None:
        if self.samples.ndim != 1:
            raise ValueError("waveform must be 1-D")
        if self.sample_rate < 1:
            raise ValueError("sample rate must be positive")

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration_seconds(self) -> float:
        return len(self) / self.sample_rate


def mock_vocode(
    phonemes: Sequence[PhonemeRecord],
    frame_params: FrameParams = FrameParams(),
) -> Waveform:
    """Render phonemes as per-frame sine bursts with a running phase.

    Each frame contributes hop_samples of a sine at the phoneme's pitch,
    amplitude min(1, energy). The phase accumulator carries across phoneme
    boundaries so joints are click-free; zero-pitch phonemes emit silence
    and leave the phase untouched.
    """
    if not phonemes:
        raise ValueError("no phonemes to vocode")
    sr = frame_params.sample_rate
    hop = frame_params.hop_samples
    chunks = []
    phase = 0.0
    for rec in phonemes:
        n = rec.duration_frames * hop
        if rec.pitch_hz <= 0.0:
            chunks.append(np.zeros(n))
            continue
        step = 2.0 * np.pi * rec.pitch_hz / sr
        amplitude = min(1.0, rec.energy)
        chunks.append(amplitude * np.sin(phase + step * np.arange(n)))
        phase = (phase + step * n) % (2.0 * np.pi)
    return Waveform(samples=np.concatenate(chunks), sample_rate=sr)


@dataclass(frozen=True)
class CrossfadeSpec:
    duration_ms: float = 1.0

    def __post_init__(self) -> None:
        if self.duration_ms < 0:
            raise ValueError("crossfade duration cannot be negative")

    def fade_samples(self, sample_rate: int) -> int:
        return int(round(self.duration_ms * sample_rate / 1000.0))


def crossfade_concat(
    chunks: Sequence[Waveform], spec: CrossfadeSpec = CrossfadeSpec()
) -> Waveform:
    """Concatenate chunks, overlapping L samples at every joint.

    Equal-gain linear: over the overlap, out[i] = tail[i] * (1 - w) +
    head[i] * w with w = (i + 1) / (L + 1), so a constant signal passes
    through a joint unchanged and the result has
    sum(len) - (len(chunks) - 1) * L samples.
    """
    if not chunks:
        raise ValueError("nothing to concatenate")
    rates = {c.sample_rate for c in chunks}
    if len(rates) != 1:
        raise RateMismatch(f"mixed sample rates: {sorted(rates)}")
    rate = rates.pop()
    fade = spec.fade_samples(rate)
    for c in chunks:
        if len(c) < fade:
            raise ChunkTooShort(f"chunk of {len(c)} samples < {fade}-sample fade")

    out = chunks[0].samples
    if fade == 0:
        out = np.concatenate([c.samples for c in chunks])
        return Waveform(samples=out, sample_rate=rate)

    w = np.arange(1, fade + 1) / (fade + 1.0)
    for c in chunks[1:]:
        joint = out[-fade:] * (1.0 - w) + c.samples[:fade] * w
        out = np.concatenate([out[:-fade], joint, c.samples[fade:]])
    return Waveform(samples=out, sample_rate=rate)


def write_wav(waveform: Waveform, path: str | Path) -> None:
    """Write 16-bit mono PCM atomically (temp file + rename).

    Samples outside [-1, 1] raise ClippedInput; silent clipping would
    corrupt every downstream energy/pitch comparison.
    """
    samples = waveform.samples
    if samples.size and float(np.max(np.abs(samples))) > 1.0:
        raise ClippedInput("samples outside [-1, 1]")
    ints = np.round(samples * _PCM_SCALE).astype("<i2")

    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            with wave.open(fh, "wb") as wav:
                wav.setnchannels(1)
                wav.setsampwidth(2)
                wav.setframerate(waveform.sample_rate)
                wav.writeframes(ints.tobytes())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _read_wav_stream(stream: BinaryIO) -> Waveform:
    with wave.open(stream, "rb") as wav:
        if wav.getnchannels() != 1 or wav.getsampwidth() != 2:
            raise ValueError("expected 16-bit mono PCM")
        rate = wav.getframerate()
        raw = wav.readframes(wav.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / _PCM_SCALE
    # -32768 lands at -1.000031; clamp so the [-1, 1] invariant holds for
    # files other tools wrote. Our own writer never emits that code.
    np.maximum(samples, -1.0, out=samples)
    return Waveform(samples=samples, sample_rate=rate)


def read_wav(path: str | Path) -> Waveform:
    with open(path, "rb") as fh:
        return _read_wav_stream(fh)


class VocoderServiceClient:
    """HTTP client for a remote vocoder returning a binary WAV."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 5.0,
        session: Optional[requests.Session] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def vocode(
        self, phonemes: Sequence[PhonemeRecord], frame_params: FrameParams
    ) -> Waveform:
        import io

        url = self.base_url + "/v1/vocode"
        payload = {
            "sample_rate": frame_params.sample_rate,
            "hop_samples": frame_params.hop_samples,
            "phonemes": [
                {
                    "symbol": p.symbol,
                    "duration_frames": p.duration_frames,
                    "pitch_hz": p.pitch_hz,
                    "energy": p.energy,
                }
                for p in phonemes
            ],
        }
        last_error: Exception | None = None
        for _ in range(2):
            try:
                response = self._session.post(url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = BackendUnavailable(f"{url} answered {response.status_code}")
                continue
            if response.status_code != 200:
                raise BackendUnavailable(
                    f"{url} answered {response.status_code}: {response.text[:200]}"
                )
            try:
                return _read_wav_stream(io.BytesIO(response.content))
            except (wave.Error, EOFError, ValueError) as exc:
                raise BackendUnavailable(f"unparseable WAV body: {exc}") from exc
        raise BackendUnavailable(f"{url} unreachable: {last_error}")
