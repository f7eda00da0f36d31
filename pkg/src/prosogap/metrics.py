"""Prosody comparison metrics.

Duration errors live in log space (a doubled phoneme is as wrong as a
halved one), energy errors on raw values, and pitch errors in cents over
DTW-aligned frames where both tracks are voiced. Reports carry the mean
absolute error, the population standard deviation of the absolute errors,
and the count.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .assembly import Waveform
from .errors import (
    DimensionMismatch,
    EmptyInput,
    EmptyPartitionWarning,
    LengthMismatch,
    MissingLabels,
    NoVoicedOverlap,
    RateTooLow,
    SpanOutOfRange,
    SymbolMismatch,
)
from .predictor import normalize_for_match
from .synth import PhonemeRecord


@dataclass(frozen=True)
class FeatureMAEReport:
    feature: str
    mae: float
    std: float  # population std of the absolute errors
    count: int


def aggregate_report(abs_errors: Sequence[float], feature: str) -> FeatureMAEReport:
    if len(abs_errors) == 0:
        raise EmptyInput(f"no {feature} errors to aggregate")
    arr = np.asarray(abs_errors, dtype=np.float64)
    return FeatureMAEReport(
        feature=feature,
        mae=float(arr.mean()),
        std=float(arr.std()),
        count=int(arr.size),
    )


def _check_parallel(
    test: Sequence[PhonemeRecord], reference: Sequence[PhonemeRecord]
) -> None:
    if len(test) != len(reference):
        raise LengthMismatch(f"{len(test)} vs {len(reference)} phonemes")
    for i, (t, r) in enumerate(zip(test, reference)):
        if t.symbol != r.symbol:
            raise SymbolMismatch(f"position {i}: {t.symbol!r} vs {r.symbol!r}")


def duration_abs_errors(
    test: Sequence[PhonemeRecord], reference: Sequence[PhonemeRecord]
) -> list[float]:
    _check_parallel(test, reference)
    return [
        abs(math.log(t.duration_frames) - math.log(r.duration_frames))
        for t, r in zip(test, reference)
    ]


def energy_abs_errors(
    test: Sequence[PhonemeRecord], reference: Sequence[PhonemeRecord]
) -> list[float]:
    _check_parallel(test, reference)
    return [abs(t.energy - r.energy) for t, r in zip(test, reference)]


def duration_mae(
    test: Sequence[PhonemeRecord], reference: Sequence[PhonemeRecord]
) -> FeatureMAEReport:
    return aggregate_report(duration_abs_errors(test, reference), "duration")


def energy_mae(
    test: Sequence[PhonemeRecord], reference: Sequence[PhonemeRecord]
) -> FeatureMAEReport:
    return aggregate_report(energy_abs_errors(test, reference), "energy")


def split_by_prediction_correctness(
    abs_errors: Sequence[float],
    predicted: Sequence[str],
    truths: Sequence[Optional[str]],
    feature: str = "duration",
) -> dict[str, FeatureMAEReport]:
    """Partition errors by whether their prediction matched the truth.

    An empty partition warns (EmptyPartitionWarning) and reports zeros
    rather than erroring; all-correct batches are legitimate.
    """
    if not (len(abs_errors) == len(predicted) == len(truths)):
        raise MissingLabels(
            f"{len(abs_errors)} errors, {len(predicted)} predictions, "
            f"{len(truths)} truths"
        )
    buckets: dict[str, list[float]] = {"correct": [], "incorrect": []}
    for err, word, truth in zip(abs_errors, predicted, truths):
        hit = truth is not None and normalize_for_match(word) == normalize_for_match(truth)
        buckets["correct" if hit else "incorrect"].append(err)

    reports = {}
    for name, errs in buckets.items():
        if errs:
            reports[name] = aggregate_report(errs, feature)
        else:
            warnings.warn(
                f"no {name} items in correctness split", EmptyPartitionWarning
            )
            reports[name] = FeatureMAEReport(feature=feature, mae=0.0, std=0.0, count=0)
    return reports


@dataclass(frozen=True)
class StftParams:
    win_samples: int = 1024
    hop_samples: int = 256


def phoneme_energy_from_waveform(
    waveform: Waveform,
    span: tuple[int, int],
    params: StftParams = StftParams(),
) -> float:
    """Mean squared STFT magnitude over a sample span.

    Frames start at multiples of the hop from sample 0 and are Hann
    windowed; the mean runs over all frequency bins of all frames that
    overlap [start, end). The waveform tail is zero padded so every sample
    is covered by at least one frame.
    """
    start, end = span
    if start < 0 or end > len(waveform) or start >= end:
        raise SpanOutOfRange(f"span [{start}, {end}) in waveform of {len(waveform)}")

    win = params.win_samples
    hop = params.hop_samples
    total = len(waveform)
    num_frames = max(1, -(-(total - win) // hop) + 1)  # ceil division
    first = max(0, (start - win) // hop + 1)
    last = min(num_frames - 1, (end - 1) // hop)
    if last < first:  # cannot happen for an in-range span; belt and braces
        raise SpanOutOfRange(f"span [{start}, {end}) overlaps no frame")

    padded_len = (num_frames - 1) * hop + win
    padded = np.zeros(padded_len)
    padded[:total] = waveform.samples
    window = np.hanning(win)
    powers = []
    for t in range(first, last + 1):
        frame = padded[t * hop : t * hop + win] * window
        spectrum = np.fft.rfft(frame)
        powers.append(np.abs(spectrum) ** 2)
    return float(np.mean(powers))


@dataclass(frozen=True)
class AlignmentPath:
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if not self.pairs:
            raise ValueError("empty alignment")

    def __len__(self) -> int:
        return len(self.pairs)


def _accumulate_impl(cost):
    rows, cols = cost.shape
    acc = np.empty((rows, cols))
    acc[0, 0] = cost[0, 0]
    for j in range(1, cols):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
    for i in range(1, rows):
        acc[i, 0] = acc[i - 1, 0] + cost[i, 0]
        for j in range(1, cols):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = cost[i, j] + best
    return acc


try:  # pragma: no cover - exercised implicitly when numba is installed
    from numba import njit

    _accumulate = njit(cache=True)(_accumulate_impl)
except Exception:  # pragma: no cover
    _accumulate = _accumulate_impl


def dtw_align(
    mel_test: np.ndarray, mel_ref: np.ndarray
) -> tuple[AlignmentPath, float]:
    """Dynamic time warping with per-cell Euclidean frame distance.

    Steps are (1,0), (0,1), (1,1) with full boundary conditions. Ties in
    the traceback prefer the diagonal, then the vertical step, then the
    horizontal one. Returns (path, accumulated cost).
    """
    a = np.asarray(mel_test, dtype=np.float64)
    b = np.asarray(mel_ref, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] == 0 or b.shape[0] == 0:
        raise DimensionMismatch("both inputs must be non-empty 2-D arrays")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"{a.shape[1]} vs {b.shape[1]} bins")

    cost = cdist(a, b, metric="euclidean")
    acc = _accumulate(cost)

    i, j = a.shape[0] - 1, b.shape[0] - 1
    pairs = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            best = min(diag, up, left)
            if diag == best:
                i, j = i - 1, j - 1
            elif up == best:
                i -= 1
            else:
                j -= 1
        pairs.append((i, j))
    pairs.reverse()
    return AlignmentPath(pairs=tuple(pairs)), float(acc[-1, -1])


@dataclass(frozen=True)
class PitchParams:
    frame_ms: float = 40.0
    hop_samples: int = 256
    fmin: float = 75.0
    fmax: float = 600.0
    voicing_threshold: float = 0.45


@dataclass(frozen=True)
class PitchTrack:
    f0_hz: np.ndarray  # 0.0 where unvoiced
    voiced: np.ndarray  # bool
    hop_samples: int
    sample_rate: int

    def __len__(self) -> int:
        return int(self.f0_hz.shape[0])


def extract_pitch(
    waveform: Waveform,
    params: PitchParams = PitchParams(),
    num_frames: Optional[int] = None,
) -> PitchTrack:
    """Normalized-autocorrelation pitch tracker.

    Windows of frame_ms are centered on each hop; each is mean-removed and
    scored by NCCF r(tau)/sqrt(e0(tau) * etau(tau)) over the lag range
    [sr/fmax, sr/fmin]. Among local maxima, the smallest lag within 0.5% of
    the best is taken (pure tones tie at lag multiples; the shortest lag is
    the fundamental), refined by parabolic interpolation. Frames whose peak
    falls below the voicing threshold are unvoiced with f0 = 0.

    num_frames pins the track length (e.g. to a clip's mel frame count);
    default is ceil(len / hop).
    """
    sr = waveform.sample_rate
    if sr < 2 * params.fmax:
        raise RateTooLow(f"rate {sr} cannot carry fmax {params.fmax}")
    hop = params.hop_samples
    frame_len = int(round(params.frame_ms * sr / 1000.0))
    lag_min = max(1, math.ceil(sr / params.fmax))
    lag_max = math.floor(sr / params.fmin)
    if lag_max + 1 >= frame_len:
        raise RateTooLow(
            f"{params.frame_ms} ms window too short for fmin {params.fmin}"
        )

    total = len(waveform)
    frames = num_frames if num_frames is not None else -(-total // hop)
    if frames <= 0:
        empty = np.zeros(0)
        return PitchTrack(
            f0_hz=empty, voiced=empty.astype(bool), hop_samples=hop, sample_rate=sr
        )

    pad = frame_len  # generous; window never leaves the padded buffer
    padded = np.zeros(total + 2 * pad)
    padded[pad : pad + total] = waveform.samples
    centers = np.arange(frames) * hop + hop // 2
    starts = centers - frame_len // 2 + pad
    windows = np.lib.stride_tricks.sliding_window_view(padded, frame_len)
    x = windows[starts].astype(np.float64)
    x = x - x.mean(axis=1, keepdims=True)

    # Autocorrelation of every window at once via FFT.
    nfft = 1
    while nfft < frame_len + lag_max + 2:
        nfft <<= 1
    spectra = np.fft.rfft(x, nfft)
    autocorr = np.fft.irfft(np.abs(spectra) ** 2, nfft)[:, : lag_max + 2]

    # Per-lag energies of the two shifted segments, from cumulative sums.
    squares = np.concatenate([np.zeros((frames, 1)), np.cumsum(x**2, axis=1)], axis=1)
    taus = np.arange(lag_max + 2)
    head_energy = squares[:, frame_len - taus]  # sum of x[0 : W - tau]^2
    tail_energy = squares[:, frame_len][:, None] - squares[:, taus]
    nccf = autocorr / np.sqrt(head_energy * tail_energy + 1e-30)

    search = nccf[:, lag_min : lag_max + 1]
    peak_values = search.max(axis=1)

    # Local maxima in lag space, then the smallest lag within 0.5% of the
    # row's peak (argmax of a boolean row finds its first True).
    left = nccf[:, lag_min - 1 : lag_max]
    right = nccf[:, lag_min + 1 : lag_max + 2]
    is_local_max = (search >= left) & (search >= right)
    near_peak = is_local_max & (search >= 0.995 * peak_values[:, None])
    has_candidate = near_peak.any(axis=1)
    best_lags = lag_min + np.where(
        has_candidate, near_peak.argmax(axis=1), search.argmax(axis=1)
    )

    rows = np.arange(frames)
    a = nccf[rows, best_lags - 1]
    b = nccf[rows, best_lags]
    c = nccf[rows, best_lags + 1]
    denom = a - 2.0 * b + c
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(denom == 0.0, 0.0, 0.5 * (a - c) / np.where(denom == 0.0, 1.0, denom))
    lags = best_lags + np.clip(delta, -0.5, 0.5)
    candidates = sr / lags
    voiced = (
        (peak_values >= params.voicing_threshold)
        & (candidates >= params.fmin)
        & (candidates <= params.fmax)
    )
    f0 = np.where(voiced, candidates, 0.0)
    return PitchTrack(f0_hz=f0, voiced=voiced, hop_samples=hop, sample_rate=sr)


def pitch_mae_cents(
    test: PitchTrack, reference: PitchTrack, path: AlignmentPath
) -> float:
    """Mean |1200 log2(f0_test / f0_ref)| over aligned both-voiced pairs."""
    terms = []
    for i, j in path.pairs:
        if i >= len(test) or j >= len(reference):
            raise LengthMismatch(
                f"path pair ({i}, {j}) outside tracks of {len(test)}/{len(reference)}"
            )
        if test.voiced[i] and reference.voiced[j]:
            terms.append(
                abs(1200.0 * math.log2(test.f0_hz[i] / reference.f0_hz[j]))
            )
    if not terms:
        raise NoVoicedOverlap("no aligned frame pair voiced on both sides")
    return float(np.mean(terms))
