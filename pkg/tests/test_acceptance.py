"""Acceptance suite: one test per claim the project must hold end to end.

Each criterion reports a PASS/FAIL line with its measured numbers in the
terminal summary (see conftest), independent of pytest's own output.
"""

import csv
import json
import math
import random
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from prosogap.assembly import (
    CrossfadeSpec,
    Waveform,
    crossfade_concat,
    mock_vocode,
    read_wav,
    write_wav,
)
from prosogap.errors import DuplicateSubmission
from prosogap.metrics import AlignmentPath, PitchTrack, dtw_align, extract_pitch, pitch_mae_cents
from prosogap.mushra.core import MushraService, Trial, TrialClip
from prosogap.pipeline import run_sensitivity
from prosogap.predictor import (
    WordFrequencyList,
    prediction_rate,
    sample_length_matched_random,
    word_length_distribution,
)
from prosogap.sensitivity import feature_range, pearson
from prosogap.synth import PhonemeRecord

from conftest import ACCEPTANCE_RESULTS
from test_metrics import brute_force_min_cost


@contextmanager
def criterion(name):
    record = {"detail": ""}
    try:
        yield record
    except BaseException as exc:
        ACCEPTANCE_RESULTS.append((name, "FAIL", record["detail"] or repr(exc)))
        raise
    ACCEPTANCE_RESULTS.append((name, "PASS", record["detail"]))


def make_cents_track(freqs):
    f0 = np.asarray(freqs, dtype=np.float64)
    return PitchTrack(f0_hz=f0, voiced=f0 > 0, hop_samples=256, sample_rate=22050)


def test_a1_pitch_error_formula():
    """An octave scores 1200 cents and a fifth matches the log ratio."""
    with criterion("A1 pitch-error formula") as record:
        start = time.perf_counter()
        path = AlignmentPath(pairs=tuple((i, i) for i in range(8)))
        octave = pitch_mae_cents(
            make_cents_track([440.0] * 8), make_cents_track([220.0] * 8), path
        )
        octave_err = abs(octave - 1200.0)

        fifth = pitch_mae_cents(
            make_cents_track([330.0] * 8), make_cents_track([220.0] * 8), path
        )
        # independent oracle in natural logs: 1200 * ln(3/2) / ln 2
        oracle = 1200.0 * (math.log(3.0) - math.log(2.0)) / math.log(2.0)
        fifth_err = abs(fifth - oracle)
        elapsed = time.perf_counter() - start

        record["detail"] = (
            f"octave off by {octave_err:.2e} cents, fifth off by "
            f"{fifth_err:.2e} cents, {elapsed:.3f}s"
        )
        assert octave_err <= 1e-9
        assert fifth_err <= 1e-9
        assert elapsed < 1.0


def test_a2_alignment_reaches_optimal_cost():
    """DTW cost equals the exhaustive minimum on 200 random frame pairs."""
    with criterion("A2 alignment optimality") as record:
        rng = np.random.default_rng(1812)
        start = time.perf_counter()
        exact_matches = 0
        for _ in range(200):
            rows = int(rng.integers(1, 9))
            cols = int(rng.integers(1, 9))
            bins = int(rng.integers(1, 6))
            a = rng.uniform(0.0, 1.0, (rows, bins))
            b = rng.uniform(0.0, 1.0, (cols, bins))
            _, got = dtw_align(a, b)
            oracle = brute_force_min_cost(cdist(a, b, metric="euclidean"))
            if got == oracle:
                exact_matches += 1
            assert got == oracle, (rows, cols, got, oracle)
        elapsed = time.perf_counter() - start
        record["detail"] = f"{exact_matches}/200 exact cost matches, {elapsed:.2f}s"
        assert exact_matches == 200
        assert elapsed < 30.0


def read_table(path):
    with open(path, newline="") as fh:
        return {row["input_type"]: row for row in csv.DictReader(fh)}


def test_a3_condition_ordering(acceptance_run):
    """Less reliable future knowledge costs accuracy, in order, on the
    64-sentence corpus: unknown > random > predicted > true = 0."""
    with criterion("A3 condition ordering") as record:
        out = acceptance_run.out
        de = read_table(out / "tables" / "duration_energy.csv")
        pitch = read_table(out / "tables" / "pitch.csv")
        summary = json.loads((out / "tables" / "summary.json").read_text())
        rates = summary["prediction_rates"]
        total = sum(acceptance_run.timings.values())

        parts = []
        for feature in ("duration", "energy"):
            values = {kind: float(de[kind][f"{feature}_mae"]) for kind in de}
            parts.append(
                f"{feature} k0 {values['k0']:.4f} > rand {values['rand']:.4f} "
                f"> pred {values['pred']:.4f} > gt {values['gt']:.4f}"
            )
        cents = {kind: float(pitch[kind]["pitch_mae_cents"]) for kind in pitch}
        parts.append(
            f"pitch k0 {cents['k0']:.1f} > rand {cents['rand']:.1f} "
            f"> pred {cents['pred']:.1f} > gt {cents['gt']:.1f}"
        )
        parts.append(f"lm rate {rates['lm']:.3f} > random {rates['random']:.3f}")
        parts.append(f"pipeline {total:.1f}s")
        record["detail"] = "; ".join(parts)

        for feature in ("duration", "energy"):
            values = {kind: float(de[kind][f"{feature}_mae"]) for kind in de}
            assert values["gt"] == 0.0, feature
            assert values["pred"] > values["gt"], feature
            assert values["rand"] > values["pred"], feature
            assert values["k0"] > values["rand"], feature
        assert cents["gt"] == 0.0
        assert cents["pred"] > 0.0
        assert cents["rand"] > cents["pred"]
        assert cents["k0"] > cents["rand"]
        assert rates["lm"] > rates["random"]
        assert total < 60.0


def test_a4_prediction_rates_and_sampler():
    """Match rates are exact fractions; random draws follow the length
    histogram within 0.02 over 10,000 samples."""
    with criterion("A4 prediction rates") as record:
        quarter = prediction_rate(
            ["a", "b", "c", "d"], ["a", "x", "y", "z"]
        )
        assert quarter == 0.25
        three_of_twelve = prediction_rate(
            ["w"] * 12, ["w", "w", "w"] + ["x"] * 9
        )
        assert three_of_twelve == 0.25

        histogram = word_length_distribution(["to"] * 7 + ["four"] * 3)
        word_list = WordFrequencyList(("at", "be", "it", "came", "dime", "rose"))
        draws = sample_length_matched_random(
            histogram, word_list, 10000, random.Random(4242)
        )
        short = sum(1 for d in draws if len(d.word) <= 2) / len(draws)
        long = 1.0 - short
        record["detail"] = (
            f"exact rates 0.25/0.25; sampler bin rates {short:.4f}/{long:.4f} "
            f"vs masses 0.7/0.3"
        )
        assert abs(short - 0.7) <= 0.02
        assert abs(long - 0.3) <= 0.02


def test_a5_crossfade_assembly():
    """Joins overlap exactly 22 samples at 22.05 kHz, lengths add up, and
    constants pass through unchanged with linear blend weights."""
    with criterion("A5 crossfade assembly") as record:
        spec = CrossfadeSpec(duration_ms=1.0)
        fade = spec.fade_samples(22050)
        assert fade == 22

        rate = 22050
        constant = crossfade_concat(
            [
                Waveform(np.full(400, 0.5), rate),
                Waveform(np.full(300, 0.5), rate),
                Waveform(np.full(500, 0.5), rate),
            ],
            spec,
        )
        assert len(constant) == 400 + 300 + 500 - 2 * fade
        assert (constant.samples == 0.5).all()

        a, b = 0.2, 0.8
        joined = crossfade_concat(
            [Waveform(np.full(100, a), rate), Waveform(np.full(90, b), rate)], spec
        )
        assert len(joined) == 100 + 90 - fade
        for i in range(fade):
            w = (i + 1) / (fade + 1.0)
            assert joined.samples[100 - fade + i] == a * (1.0 - w) + b * w
        assert (joined.samples[:78] == a).all()
        assert (joined.samples[100:] == b).all()
        record["detail"] = (
            f"fade {fade} samples, constant joint exact, blend weights linear"
        )


def test_a6_pitch_tracker_accuracy(tmp_path):
    """Pure tones track within 0.5 Hz; vocoded phonemes survive a WAV
    round trip within 1 Hz."""
    with criterion("A6 pitch tracker accuracy") as record:
        worst_tone = 0.0
        for freq in (110.0, 220.0, 440.0):
            t = np.arange(11025) / 22050.0
            wav = Waveform(0.8 * np.sin(2 * np.pi * freq * t), 22050)
            track = extract_pitch(wav)
            interior = slice(4, len(track) - 4)
            assert track.voiced[interior].all(), freq
            err = float(np.max(np.abs(track.f0_hz[interior] - freq)))
            worst_tone = max(worst_tone, err)
            assert err < 0.5, freq

        worst_clip = 0.0
        for index, pitch in enumerate((120.0, 160.0, 199.0)):
            record_ph = PhonemeRecord(
                symbol="X", word_index=1, duration_frames=40, pitch_hz=pitch, energy=0.3
            )
            wav_path = tmp_path / f"tone{index}.wav"
            write_wav(mock_vocode([record_ph]), wav_path)
            track = extract_pitch(read_wav(wav_path), num_frames=40)
            interior = slice(5, 35)
            assert track.voiced[interior].all(), pitch
            err = float(np.max(np.abs(track.f0_hz[interior] - pitch)))
            worst_clip = max(worst_clip, err)
            assert err < 1.0, pitch
        record["detail"] = (
            f"pure tones within {worst_tone:.3f} Hz, vocoded clips within "
            f"{worst_clip:.3f} Hz"
        )


def test_a7_range_statistics(acceptance_run):
    """Feature ranges ignore condition order, reported percentiles match a
    recount, and the correlation helper is exact on known fixtures."""
    with criterion("A7 range statistics") as record:
        rng = random.Random(99)
        values = [rng.uniform(1.0, 9.0) for _ in range(12)]
        base = feature_range(values, "duration")
        for _ in range(1000):
            rng.shuffle(values)
            assert feature_range(values, "duration") == base

        start = time.perf_counter()
        assert run_sensitivity(acceptance_run.cfg) == 0
        sens_time = time.perf_counter() - start
        sens = acceptance_run.out / "sensitivity"
        with open(sens / "ranges.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        summary = json.loads((sens / "summary.json").read_text())
        checked = 0
        for feature in ("duration", "energy", "pitch"):
            ranges = [float(r["range"]) for r in rows if r["feature"] == feature]
            for key, fraction in summary["range_percentiles"][feature].items():
                recount = sum(1 for v in ranges if v <= float(key)) / len(ranges)
                assert fraction == recount, (feature, key)
                checked += 1

        assert pearson([0.0, 2.0, 4.0, 6.0], [-1.0, -3.0, 3.0, 1.0]) == 0.6
        xs = [0.5, 1.25, 3.0, 4.5, 7.0]
        assert abs(pearson(xs, [2.0 * v - 3.0 for v in xs]) - 1.0) <= 1e-12
        assert abs(pearson(xs, [-0.5 * v + 1.0 for v in xs]) + 1.0) <= 1e-12

        record["detail"] = (
            f"1000 shuffles invariant, {checked} percentile cells recounted over "
            f"{len(rows)} ranges ({sens_time:.1f}s), correlation fixtures exact"
        )


def test_a8_listener_screening(tmp_path):
    """With 40 listeners and 4 planted violators, screening removes exactly
    those 4; the log replays to identical stats; duplicates are rejected."""
    with criterion("A8 listener screening") as record:
        conditions = ("hidden_reference", "k0", "gt_k1", "pred_k1", "rand_k1")
        trials = [
            Trial(
                trial_id=f"t{i:03d}",
                utterance=str(i),
                reference_file="reference.wav",
                clips=tuple(
                    TrialClip(slot=f"c{j}", file=f"clip_c{j}.wav", condition=cond)
                    for j, cond in enumerate(conditions, start=1)
                ),
            )
            for i in range(1, 11)
        ]
        log_path = tmp_path / "ratings.jsonl"
        service = MushraService(trials, log_path, seed=5)
        rng = random.Random(2024)

        violators = {f"listener{i:02d}" for i in (3, 11, 27, 38)}
        for i in range(1, 41):
            listener = f"listener{i:02d}"
            # violators miss the hidden reference on 2 of 10 trials (20%)
            bad_trials = set(rng.sample(range(10), 2)) if listener in violators else set()
            for index, trial in enumerate(trials):
                scores = {}
                for clip in trial.clips:
                    if clip.condition == "hidden_reference":
                        scores[clip.slot] = 50 if index in bad_trials else rng.randint(90, 100)
                    else:
                        scores[clip.slot] = rng.randint(20, 90)
                service.submit(listener, trial.trial_id, scores)

        stats = service.stats()
        assert set(stats["listeners_excluded"]) == violators
        assert len(stats["listeners_kept"]) == 36
        assert stats["ratings_kept"] == 36 * 10 * 5

        revived = MushraService(trials, log_path, seed=5)
        assert revived.stats() == stats

        with pytest.raises(DuplicateSubmission):
            revived.submit(
                "listener01",
                "t001",
                {f"c{j}": 50 for j in range(1, 6)},
            )

        record["detail"] = (
            f"excluded exactly {sorted(violators)}, kept 36, replayed stats "
            f"identical, duplicate rejected"
        )
