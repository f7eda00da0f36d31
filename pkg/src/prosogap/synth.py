"""Speech synthesis backends and word-level feature extraction.

The mock backend is a deterministic stand-in for a real TTS model: every
alphabetic character of a word is one phoneme, and each phoneme's duration,
pitch, energy and mel block are pure functions of an FNV-1a hash over
(phoneme, word, following word). Crucially the hash looks one word ahead,
so cutting a sentence short changes the features of its (new) last word --
the same mechanism by which a real incremental synthesizer betrays missing
context.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import requests

from .corpus import InputSequence
from .errors import (
    BackendUnavailable,
    InvalidText,
    NonContiguousWordIndices,
    WordOutOfRange,
)

END_MARKER = "<END>"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64
    return h


@dataclass(frozen=True)
class FrameParams:
    sample_rate: int = 22050
    hop_samples: int = 256
    mel_bins: int = 80


@dataclass(frozen=True)
class PhonemeRecord:
    symbol: str
    word_index: int  # 0-based index into the input token surfaces
    duration_frames: int
    pitch_hz: float
    energy: float

    def __post_init__(self) -> None:
        if self.duration_frames < 1:
            raise ValueError("duration must be at least one frame")
        if self.pitch_hz < 0:
            raise ValueError("pitch cannot be negative")
        if self.energy < 0:
            raise ValueError("energy cannot be negative")


@dataclass(frozen=True)
class SynthesisResult:
    input: InputSequence
    phonemes: tuple[PhonemeRecord, ...]
    mel: np.ndarray  # (total_frames, mel_bins) float64
    frame_params: FrameParams

    @property
    def total_frames(self) -> int:
        return int(self.mel.shape[0])


@dataclass(frozen=True)
class WordSpan:
    word_index: int
    frame_start: int
    frame_end: int  # exclusive; == frame_start for phoneme-less words


def _phoneme_hash(symbol: str, word: str, next_word: str) -> int:
    return fnv1a64(f"{symbol}|{word}|{next_word}".encode("utf-8"))


class MockSynthBackend:
    """Deterministic hash-driven synthesizer; see module docstring."""

    def __init__(self, frame_params: FrameParams = FrameParams()):
        self.frame_params = frame_params

    def synthesize(self, seq: InputSequence) -> SynthesisResult:
        words = seq.token_surfaces
        if not words or not seq.text.strip():
            raise InvalidText("nothing to synthesize")

        records = []
        blocks = []
        bins = self.frame_params.mel_bins
        b = np.arange(bins)[None, :]
        for wi, word in enumerate(words):
            is_final = wi == len(words) - 1
            next_word = END_MARKER if is_final else words[wi + 1]
            for ch in word:
                if not ch.isalpha():
                    continue
                symbol = ch.upper()
                h = _phoneme_hash(symbol, word, next_word)
                duration = 2 + h % 6 + (1 if is_final else 0)
                pitch = float(120 + h % 80 - (20 if is_final else 0))
                pitch = max(pitch, 75.0)
                energy = 0.1 + ((h >> 8) % 100) / 200
                records.append(
                    PhonemeRecord(
                        symbol=symbol,
                        word_index=wi,
                        duration_frames=duration,
                        pitch_hz=pitch,
                        energy=energy,
                    )
                )
                # (h + 31 f + 7 b) mod 1000 == ((h mod 1000) + 31 f + 7 b)
                # mod 1000, and the right side stays inside int64.
                f = np.arange(duration)[:, None]
                blocks.append(((h % 1000 + 31 * f + 7 * b) % 1000) / 1000.0)

        if not records:
            raise InvalidText(f"no synthesizable characters in {seq.text!r}")
        mel = np.concatenate(blocks, axis=0)
        return SynthesisResult(
            input=seq,
            phonemes=tuple(records),
            mel=mel,
            frame_params=self.frame_params,
        )


class TTSServiceClient:
    """HTTP client for a remote synthesizer speaking the same contract."""

    def __init__(
        self,
        base_url: str,
        frame_params: FrameParams = FrameParams(),
        timeout: float = 5.0,
        session: Optional[requests.Session] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.frame_params = frame_params
        self.timeout = timeout
        self._session = session or requests.Session()

    def synthesize(self, seq: InputSequence) -> SynthesisResult:
        url = self.base_url + "/v1/synthesize"
        last_error: Exception | None = None
        for _ in range(2):
            try:
                response = self._session.post(
                    url, json={"text": seq.text}, timeout=self.timeout
                )
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
            return self._parse(seq, response.json())
        raise BackendUnavailable(f"{url} unreachable: {last_error}")

    def _parse(self, seq: InputSequence, body: dict) -> SynthesisResult:
        try:
            records = tuple(
                PhonemeRecord(
                    symbol=str(p["symbol"]),
                    word_index=int(p["word_index"]),
                    duration_frames=int(p["duration_frames"]),
                    pitch_hz=float(p["pitch_hz"]),
                    energy=float(p["energy"]),
                )
                for p in body["phonemes"]
            )
            mel = np.asarray(body["mel"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendUnavailable(f"malformed synthesis body: {exc}") from exc
        if mel.ndim != 2 or mel.shape[0] != sum(r.duration_frames for r in records):
            raise BackendUnavailable("mel shape disagrees with phoneme durations")
        params = FrameParams(
            sample_rate=int(body.get("sample_rate", self.frame_params.sample_rate)),
            hop_samples=int(body.get("hop_samples", self.frame_params.hop_samples)),
            mel_bins=int(mel.shape[1]),
        )
        return SynthesisResult(input=seq, phonemes=records, mel=mel, frame_params=params)


def segment_words(result: SynthesisResult) -> list[WordSpan]:
    """Frame span of every input word, in order, partitioning the mel.

    Words whose surface carries no phonemes (pure punctuation) get empty
    spans. Indices must be non-decreasing and within range.
    """
    n_words = len(result.input.token_surfaces)
    totals = [0] * n_words
    previous = -1
    for rec in result.phonemes:
        wi = rec.word_index
        if wi < 0 or wi >= n_words or wi < previous:
            raise NonContiguousWordIndices(
                f"word index {wi} after {previous} (n_words={n_words})"
            )
        previous = wi
        totals[wi] += rec.duration_frames

    spans = []
    start = 0
    for wi in range(n_words):
        end = start + totals[wi]
        spans.append(WordSpan(word_index=wi, frame_start=start, frame_end=end))
        start = end
    if start != result.total_frames:
        raise NonContiguousWordIndices(
            f"phoneme durations cover {start} frames, mel has {result.total_frames}"
        )
    return spans


def target_word_features(
    result: SynthesisResult, n: int
) -> tuple[list[PhonemeRecord], np.ndarray]:
    """Phoneme records and mel rows of the n-th (1-based) input word."""
    n_words = len(result.input.token_surfaces)
    if not 1 <= n <= n_words:
        raise WordOutOfRange(f"word {n} outside 1..{n_words}")
    span = segment_words(result)[n - 1]
    phonemes = [r for r in result.phonemes if r.word_index == n - 1]
    return phonemes, result.mel[span.frame_start:span.frame_end]
