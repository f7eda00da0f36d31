"""Experiment stages: prepare, synthesize, evaluate, sensitivity, export.

Every stage reads the artifacts of the one before it and writes its own
atomically (temp file + rename), so a crashed run never leaves a truncated
JSONL behind. Items that fail against a remote backend are retried once,
then skipped and logged to errors.jsonl; the stage then reports partial
success (exit code 1) instead of dying.
"""

from __future__ import annotations

import csv
import io
import json
import os
import random
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .assembly import (
    CrossfadeSpec,
    Waveform,
    crossfade_concat,
    mock_vocode,
    read_wav,
    write_wav,
    VocoderServiceClient,
)
from .config import ExperimentConfig
from .corpus import (
    ConditionKind,
    InputSequence,
    LookaheadCondition,
    Utterance,
    build_sequence,
    enumerate_conditions,
    load_corpus,
)
from .errors import (
    BackendUnavailable,
    ConfigError,
    DegenerateInput,
    DegenerateScale,
    EmptyInput,
    MissingArtifacts,
    MissingPredictions,
    NoVoicedOverlap,
    ProsogapError,
    SymbolMismatch,
    UnknownSentenceId,
)
from .metrics import (
    aggregate_report,
    dtw_align,
    extract_pitch,
    pitch_mae_cents,
    split_by_prediction_correctness,
)
from .predictor import (
    LMServiceClient,
    NgramBackend,
    WordFrequencyList,
    predict_next,
    prediction_rate,
    sample_length_matched_random,
    word_length_distribution,
)
from .sensitivity import (
    combine_deviation_scores,
    feature_range,
    jnd_classify,
    pearson,
    range_percentiles,
)
from .synth import MockSynthBackend, SynthesisResult, TTSServiceClient, target_word_features

EXIT_CLEAN = 0
EXIT_PARTIAL = 1
EXIT_FATAL = 2

_FEATURES = ("duration", "energy", "pitch")

# Thresholds for the range percentile tables (frames / raw / cents).
_PERCENTILE_GRID = {
    "duration": (1.0, 2.0, 3.0, 5.0),
    "energy": (0.05, 0.1, 0.2, 0.3),
    "pitch": (50.0, 100.0, 200.0, 300.0, 400.0),
}


@dataclass(frozen=True)
class ExperimentPaths:
    root: Path

    @property
    def predictions(self) -> Path:
        return self.root / "predictions.jsonl"

    @property
    def features(self) -> Path:
        return self.root / "features.jsonl"

    @property
    def errors(self) -> Path:
        return self.root / "errors.jsonl"

    @property
    def mels(self) -> Path:
        return self.root / "mels"

    @property
    def audio(self) -> Path:
        return self.root / "audio"

    @property
    def tables(self) -> Path:
        return self.root / "tables"

    @property
    def sensitivity(self) -> Path:
        return self.root / "sensitivity"

    @property
    def mushra(self) -> Path:
        return self.root / "mushra"

    def mel_file(self, uid: str, label: str) -> Path:
        return self.mels / f"{uid}__{label}.npy"

    def audio_file(self, uid: str, label: str) -> Path:
        return self.audio / f"{uid}__{label}.wav"


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    text = "".join(
        json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n" for row in rows
    )
    _atomic_write_text(path, text)


def _atomic_save_npy(path: Path, array: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.save(fh, array)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _derived_rng(seed: int, *parts) -> random.Random:
    return random.Random("|".join([str(seed), *map(str, parts)]))


def condition_label(kind: ConditionKind, sample: int) -> str:
    if kind is ConditionKind.UNKNOWN:
        return "k0"
    if kind is ConditionKind.GROUND_TRUTH:
        return "gt"
    if kind is ConditionKind.FULL:
        return "full"
    return f"{kind.value}{sample}"


def _condition_labels(num_samples: int) -> list[str]:
    labels = ["k0", "gt"]
    labels += [f"pred{s}" for s in range(1, num_samples + 1)]
    labels += [f"rand{s}" for s in range(1, num_samples + 1)]
    return labels


# ---------------------------------------------------------------- prepare


def make_prediction_backend(cfg: ExperimentConfig):
    if cfg.predictor == "ngram":
        source = cfg.ngram_corpus_path or cfg.corpus_path
        return NgramBackend.train(
            source.read_text(encoding="utf-8"), order=cfg.ngram_order
        )
    return LMServiceClient(cfg.predictor)


def make_word_list(cfg: ExperimentConfig) -> WordFrequencyList:
    if cfg.word_list_path is not None:
        return WordFrequencyList.from_file(cfg.word_list_path, cap=cfg.word_list_cap)
    return WordFrequencyList.from_corpus(
        cfg.corpus_path.read_text(encoding="utf-8"), cap=cfg.word_list_cap
    )


def run_prepare(cfg: ExperimentConfig, backend=None) -> int:
    """Fill the prediction cache: num_samples LM words and num_samples
    length-matched random words for every (utterance, n)."""
    if cfg.k > 1:
        raise ConfigError(
            "the prediction cache stores one future word per sample; k > 1 "
            "is not supported by this pipeline"
        )
    corpus = load_corpus(cfg.corpus_path)
    if not corpus:
        raise ConfigError(f"corpus {cfg.corpus_path} has no sentences")
    backend = backend or make_prediction_backend(cfg)
    paths = ExperimentPaths(cfg.output_dir)

    predicted: dict[tuple[str, int], list[str]] = {}
    for utt in corpus:
        surfaces = list(utt.surfaces())
        for n in range(1, utt.num_tokens + 1):
            rng = _derived_rng(cfg.seed, "pred", utt.id, n)
            predictions = predict_next(
                backend,
                surfaces[:n],
                num_samples=cfg.num_samples,
                top_k=cfg.top_k,
                rng=rng,
                retry_budget=cfg.retry_budget,
            )
            predicted[(utt.id, n)] = [p.word for p in predictions]

    histogram = word_length_distribution(
        word for words in predicted.values() for word in words
    )
    word_list = make_word_list(cfg)

    rows = []
    for utt in corpus:
        for n in range(1, utt.num_tokens + 1):
            rng = _derived_rng(cfg.seed, "rand", utt.id, n)
            randoms = sample_length_matched_random(
                histogram, word_list, cfg.num_samples, rng
            )
            rows.append(
                {
                    "utterance": utt.id,
                    "n": n,
                    "pred": predicted[(utt.id, n)],
                    "rand": [p.word for p in randoms],
                }
            )
    _atomic_write_jsonl(paths.predictions, rows)
    return EXIT_CLEAN


def load_prediction_cache(
    paths: ExperimentPaths, corpus: Sequence[Utterance], num_samples: int
) -> dict[str, dict[str, dict[int, list[tuple[str, ...]]]]]:
    """Cache rows keyed by utterance, with suffix chains per n."""
    if not paths.predictions.is_file():
        raise MissingArtifacts(f"no prediction cache at {paths.predictions}; run prepare")
    cache: dict[str, dict[str, dict[int, list[tuple[str, ...]]]]] = {}
    for row in _read_jsonl(paths.predictions):
        uid = str(row["utterance"])
        entry = cache.setdefault(uid, {"pred": {}, "rand": {}})
        entry["pred"][int(row["n"])] = [(w,) for w in row["pred"]]
        entry["rand"][int(row["n"])] = [(w,) for w in row["rand"]]
    for utt in corpus:
        entry = cache.get(utt.id)
        if entry is None:
            raise MissingPredictions(f"utterance {utt.id!r} missing from cache")
        for n in range(1, utt.num_tokens + 1):
            for source in ("pred", "rand"):
                chains = entry[source].get(n)
                if chains is None or len(chains) < num_samples:
                    raise MissingPredictions(
                        f"utterance {utt.id!r} n={n} lacks {num_samples} "
                        f"{source} sample(s)"
                    )
    return cache


# ------------------------------------------------------------- synthesize


@dataclass
class _UtteranceOutput:
    uid: str
    feature_rows: list[dict]
    errors: list[dict]


def _synthesize_with_retry(backend, seq: InputSequence) -> SynthesisResult:
    try:
        return backend.synthesize(seq)
    except BackendUnavailable:
        return backend.synthesize(seq)


def _vocode_with_retry(vocoder, phonemes, frame_params) -> Waveform:
    try:
        return vocoder(phonemes, frame_params)
    except BackendUnavailable:
        return vocoder(phonemes, frame_params)


def _feature_rows(
    uid: str, n: int, label: str, sample: int, phonemes, predicted_word: Optional[str]
) -> list[dict]:
    rows = []
    for position, rec in enumerate(phonemes):
        rows.append(
            {
                "utterance": uid,
                "n": n,
                "condition": label,
                "sample": sample,
                "position": position,
                "symbol": rec.symbol,
                "duration_frames": rec.duration_frames,
                "pitch_hz": rec.pitch_hz,
                "energy": rec.energy,
                "predicted_word": predicted_word,
            }
        )
    return rows


def _process_utterance(
    utt: Utterance,
    cfg: ExperimentConfig,
    paths: ExperimentPaths,
    backend,
    vocoder: Callable,
    cache_entry: dict,
) -> _UtteranceOutput:
    out = _UtteranceOutput(uid=utt.id, feature_rows=[], errors=[])
    fade = CrossfadeSpec(duration_ms=cfg.crossfade_ms)

    def log_error(stage: str, exc: Exception, n: Optional[int], label: Optional[str]):
        out.errors.append(
            {
                "stage": stage,
                "utterance": utt.id,
                "n": n,
                "condition": label,
                "error": type(exc).__name__,
                "detail": str(exc),
            }
        )

    sequences = enumerate_conditions(
        utt, cfg.k, cfg.num_samples, cache_entry["pred"], cache_entry["rand"]
    )
    full_seq = sequences[-1]
    assert full_seq.condition.kind is ConditionKind.FULL

    try:
        full_result = _synthesize_with_retry(backend, full_seq)
    except (BackendUnavailable, ProsogapError) as exc:
        log_error("synthesize", exc, None, "full")
        return out  # no reference, nothing comparable for this utterance

    # Reference features and word-by-word audio for the full sentence.
    big_n = utt.num_tokens
    word_phonemes_full = []
    for n in range(1, big_n + 1):
        phons, _ = target_word_features(full_result, n)
        word_phonemes_full.append(phons)
        out.feature_rows.extend(_feature_rows(utt.id, n, "full", 0, phons, None))

    label_word_phonemes: dict[str, list] = {"full": word_phonemes_full}
    label_mels: dict[str, list[np.ndarray]] = {
        "full": [full_result.mel]
    }
    dead_labels: set[str] = set()

    for seq in sequences[:-1]:
        cond = seq.condition
        label = condition_label(cond.kind, cond.sample_index)
        if label in dead_labels:
            continue
        n = seq.target_index
        try:
            result = _synthesize_with_retry(backend, seq)
            phons, mel_chunk = target_word_features(result, n)
        except (BackendUnavailable, ProsogapError) as exc:
            log_error("synthesize", exc, n, label)
            dead_labels.add(label)
            continue
        predicted_word = None
        if cond.kind in (ConditionKind.PREDICTED, ConditionKind.RANDOM):
            source = "pred" if cond.kind is ConditionKind.PREDICTED else "rand"
            predicted_word = cache_entry[source][n][cond.sample_index - 1][0]
        out.feature_rows.extend(
            _feature_rows(utt.id, n, label, cond.sample_index, phons, predicted_word)
        )
        label_word_phonemes.setdefault(label, []).append(phons)
        label_mels.setdefault(label, []).append(mel_chunk)

    # Drop feature rows of labels that died midway; their audio and mel can
    # no longer be assembled and half a condition is worse than none.
    if dead_labels:
        out.feature_rows = [
            row for row in out.feature_rows if row["condition"] not in dead_labels
        ]

    for label, word_phonemes in label_word_phonemes.items():
        if label in dead_labels:
            continue
        try:
            chunks = []
            for phons in word_phonemes:
                if not phons:
                    continue  # pure-punctuation word, no audio
                chunks.append(
                    _vocode_with_retry(vocoder, phons, full_result.frame_params)
                )
            if not chunks:
                raise EmptyInput("no voiced words to assemble")
            audio = crossfade_concat(chunks, fade)
            write_wav(audio, paths.audio_file(utt.id, label))
            mel = (
                label_mels[label][0]
                if label == "full"
                else np.concatenate(label_mels[label], axis=0)
            )
            _atomic_save_npy(paths.mel_file(utt.id, label), mel)
        except (BackendUnavailable, ProsogapError) as exc:
            log_error("assemble", exc, None, label)
            dead_labels.add(label)
            out.feature_rows = [
                row for row in out.feature_rows if row["condition"] != label
            ]
            for stale in (paths.audio_file(utt.id, label), paths.mel_file(utt.id, label)):
                if stale.exists():
                    stale.unlink()
    return out


def run_synthesize(cfg: ExperimentConfig, backend=None, vocoder=None) -> int:
    if cfg.k > 1:
        raise ConfigError("k > 1 is not supported by this pipeline")
    corpus = load_corpus(cfg.corpus_path)
    paths = ExperimentPaths(cfg.output_dir)
    cache = load_prediction_cache(paths, corpus, cfg.num_samples)

    if backend is None:
        backend = (
            MockSynthBackend(cfg.frames)
            if cfg.synthesizer == "mock"
            else TTSServiceClient(cfg.synthesizer, cfg.frames)
        )
    if vocoder is None:
        if cfg.vocoder == "mock":
            vocoder = mock_vocode
        else:
            client = VocoderServiceClient(cfg.vocoder)
            vocoder = client.vocode

    paths.mels.mkdir(parents=True, exist_ok=True)
    paths.audio.mkdir(parents=True, exist_ok=True)

    def job(utt: Utterance) -> _UtteranceOutput:
        return _process_utterance(utt, cfg, paths, backend, vocoder, cache[utt.id])

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outputs = list(pool.map(job, corpus))
    else:
        outputs = [job(utt) for utt in corpus]

    feature_rows = [row for out in outputs for row in out.feature_rows]
    error_rows = [row for out in outputs for row in out.errors]
    _atomic_write_jsonl(paths.features, feature_rows)
    _atomic_write_jsonl(paths.errors, error_rows)
    return EXIT_PARTIAL if error_rows else EXIT_CLEAN


# --------------------------------------------------------------- evaluate


def _load_features(paths: ExperimentPaths):
    if not paths.features.is_file():
        raise MissingArtifacts(f"no features at {paths.features}; run synthesize")
    grouped: dict[tuple[str, int], dict[tuple[str, int], list[dict]]] = {}
    for row in _read_jsonl(paths.features):
        key = (str(row["utterance"]), int(row["n"]))
        cond = (str(row["condition"]), int(row["sample"]))
        grouped.setdefault(key, {}).setdefault(cond, []).append(row)
    for conditions in grouped.values():
        for rows in conditions.values():
            rows.sort(key=lambda r: r["position"])
    return grouped


def _truth_after(utt: Utterance, n: int) -> Optional[str]:
    return utt.tokens[n].surface if n < utt.num_tokens else None


_KIND_OF_LABEL = {"k0": "k0", "gt": "gt", "pred": "pred", "rand": "rand"}


def _label_kind(label: str) -> str:
    return label.rstrip("0123456789") if label not in ("k0", "full") else label


def run_evaluate(cfg: ExperimentConfig) -> int:
    corpus = load_corpus(cfg.corpus_path)
    by_id = {utt.id: utt for utt in corpus}
    paths = ExperimentPaths(cfg.output_dir)
    grouped = _load_features(paths)
    cache = load_prediction_cache(paths, corpus, cfg.num_samples)

    paths.tables.mkdir(parents=True, exist_ok=True)
    skip_rows: list[dict] = []
    if paths.errors.is_file():
        skip_rows = _read_jsonl(paths.errors)
        skip_rows = [r for r in skip_rows if r.get("stage") != "evaluate"]

    error_rows = []
    pooled: dict[str, dict[str, list[float]]] = {
        kind: {"duration": [], "energy": []} for kind in ("k0", "gt", "pred", "rand")
    }
    pred_rows_flat: list[tuple[float, float, str, Optional[str]]] = []

    for (uid, n), conditions in sorted(grouped.items()):
        reference = conditions.get(("full", 0))
        if reference is None:
            continue
        utt = by_id.get(uid)
        truth = _truth_after(utt, n) if utt else None
        for (label, sample), rows in sorted(conditions.items()):
            if label == "full":
                continue
            kind = _label_kind(label)
            if len(rows) != len(reference) or any(
                a["symbol"] != b["symbol"] for a, b in zip(rows, reference)
            ):
                skip_rows.append(
                    {
                        "stage": "evaluate",
                        "utterance": uid,
                        "n": n,
                        "condition": label,
                        "error": "SymbolMismatch",
                        "detail": "test/reference phoneme symbols disagree",
                    }
                )
                continue
            for test_row, ref_row in zip(rows, reference):
                dur_err = abs(
                    np.log(test_row["duration_frames"]) - np.log(ref_row["duration_frames"])
                )
                energy_err = abs(test_row["energy"] - ref_row["energy"])
                pooled[kind]["duration"].append(float(dur_err))
                pooled[kind]["energy"].append(float(energy_err))
                error_rows.append(
                    {
                        "utterance": uid,
                        "n": n,
                        "condition": label,
                        "sample": sample,
                        "position": test_row["position"],
                        "symbol": test_row["symbol"],
                        "duration_err": float(dur_err),
                        "energy_err": float(energy_err),
                        "predicted_word": test_row.get("predicted_word"),
                        "true_word": truth,
                    }
                )
                if kind == "pred":
                    pred_rows_flat.append(
                        (
                            float(dur_err),
                            float(energy_err),
                            str(test_row.get("predicted_word") or ""),
                            truth,
                        )
                    )

    if not error_rows:
        raise MissingArtifacts("no comparable feature rows; synthesize first")

    _atomic_write_jsonl(paths.tables / "per_phoneme_errors.jsonl", error_rows)

    # Duration/energy table: four conditions plus the correctness split of
    # the predicted condition.
    table_rows = []
    for kind in ("k0", "gt", "pred", "rand"):
        dur = pooled[kind]["duration"]
        ene = pooled[kind]["energy"]
        if not dur:
            continue
        dur_rep = aggregate_report(dur, "duration")
        ene_rep = aggregate_report(ene, "energy")
        table_rows.append(
            {
                "input_type": kind,
                "count": dur_rep.count,
                "duration_mae": dur_rep.mae,
                "duration_std": dur_rep.std,
                "energy_mae": ene_rep.mae,
                "energy_std": ene_rep.std,
            }
        )
    if pred_rows_flat:
        dur_errs = [r[0] for r in pred_rows_flat]
        ene_errs = [r[1] for r in pred_rows_flat]
        words = [r[2] for r in pred_rows_flat]
        truths = [r[3] for r in pred_rows_flat]
        import warnings as _warnings

        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            dur_split = split_by_prediction_correctness(dur_errs, words, truths, "duration")
            ene_split = split_by_prediction_correctness(ene_errs, words, truths, "energy")
        for name in ("correct", "incorrect"):
            table_rows.append(
                {
                    "input_type": f"pred_{name}",
                    "count": dur_split[name].count,
                    "duration_mae": dur_split[name].mae,
                    "duration_std": dur_split[name].std,
                    "energy_mae": ene_split[name].mae,
                    "energy_std": ene_split[name].std,
                }
            )
    _write_csv(
        paths.tables / "duration_energy.csv",
        ("input_type", "count", "duration_mae", "duration_std", "energy_mae", "energy_std"),
        table_rows,
    )

    # Pitch over assembled audio, one value per (utterance, condition).
    labels = _condition_labels(cfg.num_samples)
    sentence_rows = []
    pitch_pooled: dict[str, list[float]] = {k: [] for k in ("k0", "gt", "pred", "rand")}
    for utt in corpus:
        ref_mel_path = paths.mel_file(utt.id, "full")
        ref_wav_path = paths.audio_file(utt.id, "full")
        if not ref_mel_path.is_file() or not ref_wav_path.is_file():
            continue
        ref_mel = np.load(ref_mel_path)
        ref_track = extract_pitch(
            read_wav(ref_wav_path), cfg.pitch, num_frames=ref_mel.shape[0]
        )
        for label in labels:
            mel_path = paths.mel_file(utt.id, label)
            wav_path = paths.audio_file(utt.id, label)
            if not mel_path.is_file() or not wav_path.is_file():
                continue
            test_mel = np.load(mel_path)
            test_track = extract_pitch(
                read_wav(wav_path), cfg.pitch, num_frames=test_mel.shape[0]
            )
            path_alignment, _ = dtw_align(test_mel, ref_mel)
            try:
                cents = pitch_mae_cents(test_track, ref_track, path_alignment)
            except NoVoicedOverlap as exc:
                skip_rows.append(
                    {
                        "stage": "evaluate",
                        "utterance": utt.id,
                        "n": None,
                        "condition": label,
                        "error": "NoVoicedOverlap",
                        "detail": str(exc),
                    }
                )
                continue
            kind = _label_kind(label)
            sentence_rows.append(
                {"utterance": utt.id, "condition": label, "cents": cents}
            )
            pitch_pooled[kind].append(cents)

    _write_csv(
        paths.tables / "sentence_pitch.csv",
        ("utterance", "condition", "cents"),
        sentence_rows,
    )
    pitch_table = []
    for kind in ("k0", "gt", "pred", "rand"):
        values = pitch_pooled[kind]
        if not values:
            continue
        report = aggregate_report(values, "pitch")
        pitch_table.append(
            {
                "input_type": kind,
                "count": report.count,
                "pitch_mae_cents": report.mae,
                "pitch_std": report.std,
            }
        )
    _write_csv(
        paths.tables / "pitch.csv",
        ("input_type", "count", "pitch_mae_cents", "pitch_std"),
        pitch_table,
    )

    # Prediction rates over slots that have a true next word.
    lm_words, lm_truths, rand_words, rand_truths = [], [], [], []
    for utt in corpus:
        entry = cache[utt.id]
        for n in range(1, utt.num_tokens):
            truth = _truth_after(utt, n)
            for chain in entry["pred"][n][: cfg.num_samples]:
                lm_words.append(chain[0])
                lm_truths.append(truth)
            for chain in entry["rand"][n][: cfg.num_samples]:
                rand_words.append(chain[0])
                rand_truths.append(truth)
    rates = {}
    if lm_words:
        rates = {
            "lm": prediction_rate(lm_words, lm_truths),
            "random": prediction_rate(rand_words, rand_truths),
        }

    summary = {
        "prediction_rates": rates,
        "tables": {
            "duration_energy": "tables/duration_energy.csv",
            "pitch": "tables/pitch.csv",
            "sentence_pitch": "tables/sentence_pitch.csv",
            "per_phoneme_errors": "tables/per_phoneme_errors.jsonl",
        },
        "phoneme_comparisons": len(error_rows),
        "sentence_pitch_values": len(sentence_rows),
        "skipped": len([r for r in skip_rows if r.get("stage") == "evaluate"]),
    }
    _atomic_write_text(
        paths.tables / "summary.json", json.dumps(summary, indent=2, sort_keys=True)
    )
    _atomic_write_jsonl(paths.errors, skip_rows)
    return EXIT_PARTIAL if summary["skipped"] else EXIT_CLEAN


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[dict]) -> None:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(header), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    _atomic_write_text(path, buffer.getvalue())


# ------------------------------------------------------------ sensitivity


def run_sensitivity(cfg: ExperimentConfig, ratings_csv: Optional[Path] = None) -> int:
    paths = ExperimentPaths(cfg.output_dir)
    grouped = _load_features(paths)
    paths.sensitivity.mkdir(parents=True, exist_ok=True)
    partial = False

    # The twelve-value condition set per phoneme: 5 pred + 5 rand + gt + full.
    need = [("gt", 0), ("full", 0)]
    need += [("pred", s) for s in range(1, cfg.num_samples + 1)]
    need += [("rand", s) for s in range(1, cfg.num_samples + 1)]

    def row_feature(row: dict, feature: str) -> float:
        key = {
            "duration": "duration_frames",
            "energy": "energy",
            "pitch": "pitch_hz",
        }[feature]
        return float(row[key])

    range_rows = []
    ranges_by_feature: dict[str, list[float]] = {f: [] for f in _FEATURES}
    # deviation maxima per (utterance, condition kind)
    deviation: dict[tuple[str, str], dict[str, float]] = {}

    for (uid, n), conditions in sorted(grouped.items()):
        sets = {}
        complete = True
        for label, sample in need:
            cond_label = label if sample == 0 else f"{label}{sample}"
            rows = conditions.get((cond_label, sample))
            if rows is None:
                complete = False
                break
            sets[(label, sample)] = rows
        if not complete:
            continue
        lengths = {len(rows) for rows in sets.values()}
        symbols = {tuple(r["symbol"] for r in rows) for rows in sets.values()}
        if len(lengths) != 1 or len(symbols) != 1:
            partial = True
            continue

        full_rows = sets[("full", 0)]
        for position in range(len(full_rows)):
            for feature in _FEATURES:
                values = [row_feature(rows[position], feature) for rows in sets.values()]
                spread = feature_range(values, feature)
                ranges_by_feature[feature].append(spread)
                if feature == "pitch":
                    below = jnd_classify(spread, "pitch")
                elif feature == "duration":
                    below = jnd_classify(
                        spread, "duration", base_value=row_feature(full_rows[position], "duration")
                    )
                else:
                    below = None
                range_rows.append(
                    {
                        "utterance": uid,
                        "n": n,
                        "position": position,
                        "symbol": full_rows[position]["symbol"],
                        "feature": feature,
                        "range": spread,
                        "below_jnd": "" if below is None else str(below).lower(),
                    }
                )
                # deviations from the full-sentence value, per condition kind
                full_value = row_feature(full_rows[position], feature)
                for kind in ("pred", "rand"):
                    kind_values = [
                        row_feature(sets[(kind, s)][position], feature)
                        for s in range(1, cfg.num_samples + 1)
                    ]
                    dev = max(abs(v - full_value) for v in kind_values)
                    slot = deviation.setdefault(
                        (uid, kind), {f: 0.0 for f in _FEATURES}
                    )
                    slot[feature] = max(slot[feature], dev)

    if not range_rows:
        raise MissingArtifacts("no complete condition sets; synthesize first")

    _write_csv(
        paths.sensitivity / "ranges.csv",
        ("utterance", "n", "position", "symbol", "feature", "range", "below_jnd"),
        range_rows,
    )

    percentiles = {
        feature: range_percentiles(ranges_by_feature[feature], _PERCENTILE_GRID[feature])
        for feature in _FEATURES
        if ranges_by_feature[feature]
    }
    below_jnd_fraction = {}
    for feature in ("duration", "pitch"):
        flags = [
            row["below_jnd"] == "true"
            for row in range_rows
            if row["feature"] == feature
        ]
        below_jnd_fraction[feature] = sum(flags) / len(flags) if flags else None

    # Combined per-sentence deviation scores.
    points = sorted(deviation.keys())
    sentence_rows = []
    combined_by_point: dict[tuple[str, str], float] = {}
    notes = []
    if points:
        per_feature = {
            feature: [deviation[p][feature] for p in points] for feature in _FEATURES
        }
        try:
            combined = combine_deviation_scores(per_feature)
            combined_by_point = dict(zip(points, combined))
            for (uid, kind), score in combined_by_point.items():
                sentence_rows.append(
                    {"utterance": uid, "condition": kind, "combined_score": score}
                )
        except DegenerateScale as exc:
            notes.append(f"combined scores unavailable: {exc}")
            partial = True
    _write_csv(
        paths.sensitivity / "sentence_scores.csv",
        ("utterance", "condition", "combined_score"),
        sentence_rows,
    )

    correlation = None
    scatter_rows = []
    if ratings_csv is not None and combined_by_point:
        means = _mushra_means(Path(ratings_csv))
        xs, ys = [], []
        for (uid, kind), score in combined_by_point.items():
            mean_score = means.get((uid, kind))
            if mean_score is None:
                continue
            scatter_rows.append(
                {
                    "utterance": uid,
                    "condition": kind,
                    "combined_score": score,
                    "mushra_mean": mean_score,
                }
            )
            xs.append(score)
            ys.append(mean_score)
        try:
            correlation = pearson(xs, ys)
        except DegenerateInput as exc:
            notes.append(f"correlation unavailable: {exc}")
            partial = True
        _write_csv(
            paths.sensitivity / "scatter.csv",
            ("utterance", "condition", "combined_score", "mushra_mean"),
            scatter_rows,
        )

    summary = {
        "range_percentiles": percentiles,
        "below_jnd_fraction": below_jnd_fraction,
        "phonemes": len(ranges_by_feature["duration"]),
        "sentence_points": len(sentence_rows),
        "pearson_r": correlation,
        "notes": notes,
    }
    _atomic_write_text(
        paths.sensitivity / "summary.json", json.dumps(summary, indent=2, sort_keys=True)
    )
    return EXIT_PARTIAL if partial else EXIT_CLEAN


def _mushra_means(ratings_csv: Path) -> dict[tuple[str, str], float]:
    """Mean post-screening score per (utterance, pred/rand) from an export CSV."""
    from .mushra.core import screen_listeners

    if not ratings_csv.is_file():
        raise MissingArtifacts(f"no ratings file at {ratings_csv}")
    with open(ratings_csv, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    parsed = [
        {
            "listener_id": row["listener_id"],
            "trial_id": row["trial_id"],
            "utterance": row["utterance"],
            "condition": row["condition"],
            "score": int(row["score"]),
        }
        for row in rows
    ]
    kept, _ = screen_listeners(parsed)
    condition_map = {"pred_k1": "pred", "rand_k1": "rand"}
    sums: dict[tuple[str, str], list[int]] = {}
    for row in parsed:
        if row["listener_id"] not in kept:
            continue
        kind = condition_map.get(row["condition"])
        if kind is None:
            continue
        sums.setdefault((row["utterance"], kind), []).append(row["score"])
    return {key: float(np.mean(scores)) for key, scores in sums.items()}


# ----------------------------------------------------------- export-mushra

_MUSHRA_CONDITIONS = ("hidden_reference", "k0", "gt_k1", "pred_k1", "rand_k1")


def run_export_mushra(cfg: ExperimentConfig, sentence_ids: Optional[Sequence[str]] = None) -> int:
    corpus = load_corpus(cfg.corpus_path)
    by_id = {utt.id: utt for utt in corpus}
    paths = ExperimentPaths(cfg.output_dir)
    if not paths.audio.is_dir():
        raise MissingArtifacts(f"no audio at {paths.audio}; run synthesize")

    if sentence_ids:
        chosen = [str(s) for s in sentence_ids]
    elif cfg.mushra.sentence_ids:
        chosen = list(cfg.mushra.sentence_ids)
    else:
        chosen = [utt.id for utt in corpus[: cfg.mushra.num_sentences]]
    for uid in chosen:
        if uid not in by_id:
            raise UnknownSentenceId(f"sentence id {uid!r} not in corpus")

    trials = []
    bundle = paths.mushra
    for index, uid in enumerate(chosen, start=1):
        rng = _derived_rng(cfg.seed, "mushra", uid)
        pred_sample = 1 + rng.randrange(cfg.num_samples)
        rand_sample = 1 + rng.randrange(cfg.num_samples)
        label_of = {
            "hidden_reference": "full",
            "k0": "k0",
            "gt_k1": "gt",
            "pred_k1": f"pred{pred_sample}",
            "rand_k1": f"rand{rand_sample}",
        }
        sources = {"reference": paths.audio_file(uid, "full")}
        for condition, label in label_of.items():
            sources[condition] = paths.audio_file(uid, label)
        missing = [str(p) for p in sources.values() if not p.is_file()]
        if missing:
            raise MissingArtifacts(f"missing audio for trial {uid!r}: {missing}")

        trial_id = f"t{index:03d}"
        trial_dir = bundle / "trials" / trial_id
        trial_dir.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(sources["reference"], trial_dir / "reference.wav")

        permutation_seed = rng.randrange(2**32)
        order = list(_MUSHRA_CONDITIONS)
        random.Random(permutation_seed).shuffle(order)
        clips = []
        for slot_index, condition in enumerate(order, start=1):
            slot = f"c{slot_index}"
            file_name = f"clip_{slot}.wav"
            shutil.copyfile(sources[condition], trial_dir / file_name)
            clips.append(
                {
                    "slot": slot,
                    "file": file_name,
                    "condition": condition,
                    "sample": pred_sample
                    if condition == "pred_k1"
                    else rand_sample
                    if condition == "rand_k1"
                    else 0,
                }
            )
        trials.append(
            {
                "trial_id": trial_id,
                "utterance": uid,
                "reference": "reference.wav",
                "permutation_seed": permutation_seed,
                "clips": clips,
            }
        )

    manifest = {"seed": cfg.seed, "trials": trials}
    _atomic_write_text(
        bundle / "trials.json", json.dumps(manifest, indent=2, sort_keys=True)
    )
    return EXIT_CLEAN
