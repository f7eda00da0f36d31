"""Experiment configuration: a JSON file plus environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .metrics import PitchParams, StftParams
from .synth import FrameParams

BACKEND_URL_ENV = "PROSOGAP_BACKEND_URL"


@dataclass(frozen=True)
class MushraConfig:
    num_sentences: int = 20
    sentence_ids: Optional[tuple[str, ...]] = None


@dataclass(frozen=True)
class ExperimentConfig:
    corpus_path: Path
    output_dir: Path
    k: int = 1
    num_samples: int = 5
    top_k: int = 30
    seed: int = 0
    workers: int = 1
    synthesizer: str = "mock"  # "mock" or an http(s) base URL
    vocoder: str = "mock"
    predictor: str = "ngram"  # "ngram" or an http(s) base URL
    ngram_order: int = 2
    ngram_corpus_path: Optional[Path] = None  # defaults to the corpus itself
    word_list_path: Optional[Path] = None
    word_list_cap: int = 1266
    retry_budget: int = 100
    crossfade_ms: float = 1.0
    frames: FrameParams = field(default_factory=FrameParams)
    stft: StftParams = field(default_factory=StftParams)
    pitch: PitchParams = field(default_factory=PitchParams)
    mushra: MushraConfig = field(default_factory=MushraConfig)

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ConfigError("k must be >= 0")
        if self.num_samples < 1:
            raise ConfigError("num_samples must be >= 1")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.retry_budget < 1:
            raise ConfigError("retry_budget must be >= 1")
        if self.crossfade_ms < 0:
            raise ConfigError("crossfade_ms cannot be negative")


def _subconfig(cls, raw: dict, section: str):
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad {section!r} section: {exc}") from exc


def load_config(
    path: str | Path,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExperimentConfig:
    """Parse a config file; CLI overrides beat the file, env beats both.

    Relative paths are resolved against the config file's directory. The
    PROSOGAP_BACKEND_URL environment variable, when set, replaces the
    synthesizer backend.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"unreadable config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    base = path.parent

    def resolve(name: str, required: bool = False) -> Optional[Path]:
        value = raw.get(name)
        if value is None:
            if required:
                raise ConfigError(f"config needs {name!r}")
            return None
        return (base / str(value)).resolve()

    corpus_path = resolve("corpus", required=True)
    if not corpus_path.is_file():
        raise ConfigError(f"corpus file not found: {corpus_path}")
    word_list_path = resolve("word_list")
    if word_list_path is not None and not word_list_path.is_file():
        raise ConfigError(f"word list not found: {word_list_path}")
    ngram_corpus_path = resolve("ngram_corpus")
    if ngram_corpus_path is not None and not ngram_corpus_path.is_file():
        raise ConfigError(f"ngram corpus not found: {ngram_corpus_path}")

    output_dir = resolve("output_dir") or (base / "output").resolve()

    synthesizer = os.environ.get(BACKEND_URL_ENV) or raw.get("synthesizer", "mock")

    frames = _subconfig(FrameParams, raw.get("frames", {}), "frames")
    pitch_raw = dict(raw.get("pitch", {}))
    # The pitch hop follows the mel hop unless pinned explicitly, so tracks
    # and mel matrices index the same frame axis.
    pitch_raw.setdefault("hop_samples", frames.hop_samples)

    mushra_raw = raw.get("mushra", {})
    sentence_ids = mushra_raw.get("sentence_ids")
    mushra = MushraConfig(
        num_sentences=int(mushra_raw.get("num_sentences", 20)),
        sentence_ids=tuple(str(s) for s in sentence_ids) if sentence_ids else None,
    )

    try:
        return ExperimentConfig(
            corpus_path=corpus_path,
            output_dir=output_dir,
            k=int(raw.get("k", 1)),
            num_samples=int(raw.get("num_samples", 5)),
            top_k=int(raw.get("top_k", 30)),
            seed=int(seed if seed is not None else raw.get("seed", 0)),
            workers=int(workers if workers is not None else raw.get("workers", 1)),
            synthesizer=str(synthesizer),
            vocoder=str(raw.get("vocoder", "mock")),
            predictor=str(raw.get("predictor", "ngram")),
            ngram_order=int(raw.get("ngram_order", 2)),
            ngram_corpus_path=ngram_corpus_path,
            word_list_path=word_list_path,
            word_list_cap=int(raw.get("word_list_cap", 1266)),
            retry_budget=int(raw.get("retry_budget", 100)),
            crossfade_ms=float(raw.get("crossfade_ms", 1.0)),
            frames=frames,
            stft=_subconfig(StftParams, raw.get("stft", {}), "stft"),
            pitch=_subconfig(PitchParams, pitch_raw, "pitch"),
            mushra=mushra,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
