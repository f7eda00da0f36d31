"""Next-word prediction: a frequency n-gram backend, a remote LM client,
the space-prefix word filter, and length-matched random words.

Predictions enter the pipeline one word at a time. Whatever the backend,
raw samples must start with a space and contain a single clean word before
they count; the filter is what keeps "previously" from sneaking in as a
continuation of "previous", and keeps punctuation out entirely.
"""

from __future__ import annotations

import random
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import requests

from .errors import (
    BackendUnavailable,
    EmptyBin,
    EmptyCorpus,
    EmptyInput,
    FilterExhausted,
    LengthMismatch,
)

# A word: letters, with apostrophes/hyphens allowed inside ("don't",
# "well-known") but not at the edges.
_WORD_RE = re.compile(r"[^\W\d_]+(?:['-][^\W\d_]+)*\Z")
_WORD_FIND_RE = re.compile(r"[^\W\d_]+(?:['-][^\W\d_]+)*")
_SENTENCE_SPLIT_RE = re.compile(r"[.!?]+")

DEFAULT_LENGTH_BINS: tuple[tuple[int, Optional[int]], ...] = (
    (1, 2),
    (3, 4),
    (5, 6),
    (7, 8),
    (9, 10),
    (11, None),
)


class PredictionSource(Enum):
    LANGUAGE_MODEL = "lm"
    RANDOM = "random"


@dataclass(frozen=True)
class Prediction:
    word: str
    sample_index: int  # 1-based
    source: PredictionSource

    def __post_init__(self) -> None:
        if not self.word or any(ch.isspace() for ch in self.word):
            raise ValueError(f"prediction {self.word!r} is not a single word")
        if self.sample_index < 1:
            raise ValueError("sample_index is 1-based")


def space_prefix_filter(raw_sample: str) -> Optional[str]:
    """Accept a raw continuation iff it is " " + one clean word.

    Returns the word without the leading space, or None. Anything else --
    missing space (a mid-word continuation), punctuation, digits, embedded
    whitespace -- is rejected.
    """
    if not raw_sample.startswith(" "):
        return None
    word = raw_sample[1:]
    if _WORD_RE.fullmatch(word):
        return word
    return None


def normalize_for_match(word: str) -> str:
    """Case-fold and drop punctuation for prediction/truth comparison."""
    kept = [ch for ch in word if ch.isalpha() or ch in "'-"]
    return "".join(kept).casefold()


def _sentence_token_lists(corpus_text: str) -> list[list[str]]:
    sentences = []
    for line in corpus_text.splitlines():
        for piece in _SENTENCE_SPLIT_RE.split(line):
            tokens = _WORD_FIND_RE.findall(piece.lower())
            if tokens:
                sentences.append(tokens)
    return sentences


class NgramBackend:
    """Count-based next-word model with unigram backoff.

    Training lowercases, strips punctuation and digits, and never counts
    across sentence boundaries (newlines or .!? runs). Samples come back
    space-prefixed so they face the same filter as a remote model's.
    """

    def __init__(self, order: int, context_counts: Mapping[tuple[str, ...], Counter]):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = order
        self._counts = context_counts
        self._unigrams = context_counts.get((), Counter())
        if not self._unigrams:
            raise EmptyCorpus("no tokens counted")

    @classmethod
    def train(cls, corpus_text: str, order: int = 2) -> "NgramBackend":
        if order < 1:
            raise ValueError("order must be >= 1")
        counts: dict[tuple[str, ...], Counter] = defaultdict(Counter)
        for tokens in _sentence_token_lists(corpus_text):
            for i, token in enumerate(tokens):
                counts[()][token] += 1
                if order >= 2 and i >= 1:
                    context = tuple(tokens[max(0, i - order + 1):i])
                    counts[context][token] += 1
        if not counts:
            raise EmptyCorpus("no tokens in corpus text")
        return cls(order=order, context_counts=dict(counts))

    def _normalize_prompt(self, prompt_tokens: Sequence[str]) -> list[str]:
        normalized = []
        for token in prompt_tokens:
            normalized.extend(_WORD_FIND_RE.findall(token.lower()))
        return normalized

    def top_candidates(
        self, prompt_tokens: Sequence[str], top_k: int
    ) -> list[tuple[str, int]]:
        """The top_k most frequent continuations, (count desc, word asc)."""
        tokens = self._normalize_prompt(prompt_tokens)
        counter: Counter = Counter()
        if self.order >= 2 and tokens:
            context = tuple(tokens[-(self.order - 1):])
            counter = self._counts.get(context, Counter())
        if not counter:
            counter = self._unigrams
        ranked = sorted(counter.items(), key=lambda item: (-item[1], item[0]))
        return ranked[:top_k]

    def sample_raw(
        self,
        prompt_tokens: Sequence[str],
        top_k: int,
        count: int,
        rng: random.Random,
    ) -> list[str]:
        """Draw `count` raw continuations, frequency-weighted over the
        top_k candidates, each formatted " word"."""
        candidates = self.top_candidates(prompt_tokens, top_k)
        if not candidates:
            raise EmptyCorpus("no candidates to sample from")
        words = [w for w, _ in candidates]
        weights = [c for _, c in candidates]
        return [" " + w for w in rng.choices(words, weights=weights, k=count)]


class LMServiceClient:
    """HTTP client for a remote next-word service."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 5.0,
        session: Optional[requests.Session] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def sample_raw(
        self,
        prompt_tokens: Sequence[str],
        top_k: int,
        count: int,
        rng: random.Random,
    ) -> list[str]:
        # rng is unused remotely; the server owns its own sampling.
        del rng
        payload = {
            "prompt": " ".join(prompt_tokens),
            "top_k": top_k,
            "num_samples": count,
        }
        url = self.base_url + "/v1/predict"
        last_error: Exception | None = None
        for _ in range(2):  # one retry
            try:
                response = self._session.post(url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = BackendUnavailable(
                    f"{url} answered {response.status_code}"
                )
                continue
            if response.status_code != 200:
                raise BackendUnavailable(
                    f"{url} answered {response.status_code}: {response.text[:200]}"
                )
            body = response.json()
            samples = body.get("samples")
            if not isinstance(samples, list) or len(samples) < count:
                raise BackendUnavailable(f"{url} returned a malformed body")
            return [str(s) for s in samples[:count]]
        raise BackendUnavailable(f"{url} unreachable: {last_error}")


def predict_next(
    backend,
    prompt_tokens: Sequence[str],
    num_samples: int,
    top_k: int,
    rng: random.Random,
    retry_budget: int = 100,
) -> list[Prediction]:
    """Draw num_samples filtered predictions for the next word.

    Each sample slot redraws until the space-prefix filter accepts, up to
    retry_budget draws, then gives up with FilterExhausted.
    """
    if not prompt_tokens:
        raise ValueError("prompt must contain at least one token")
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    predictions = []
    for sample_index in range(1, num_samples + 1):
        for _ in range(retry_budget):
            raw = backend.sample_raw(prompt_tokens, top_k, 1, rng)[0]
            word = space_prefix_filter(raw)
            if word is not None:
                predictions.append(
                    Prediction(word, sample_index, PredictionSource.LANGUAGE_MODEL)
                )
                break
        else:
            raise FilterExhausted(
                f"no accepted sample within {retry_budget} draws "
                f"(prompt ends with {prompt_tokens[-1]!r})"
            )
    return predictions


@dataclass(frozen=True)
class LengthHistogram:
    """Word-length distribution over inclusive bins; masses sum to 1."""

    bins: tuple[tuple[int, Optional[int]], ...]
    masses: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.bins) != len(self.masses):
            raise ValueError("one mass per bin")
        if abs(sum(self.masses) - 1.0) > 1e-9:
            raise ValueError("masses must sum to 1")

    def bin_of(self, length: int) -> int:
        for i, (lo, hi) in enumerate(self.bins):
            if lo <= length and (hi is None or length <= hi):
                return i
        raise ValueError(f"length {length} falls in no bin")


def word_length_distribution(
    words: Iterable[str],
    bins: tuple[tuple[int, Optional[int]], ...] = DEFAULT_LENGTH_BINS,
) -> LengthHistogram:
    counts = [0] * len(bins)
    total = 0
    probe = LengthHistogram(bins=bins, masses=tuple([1.0] + [0.0] * (len(bins) - 1)))
    for word in words:
        counts[probe.bin_of(len(word))] += 1
        total += 1
    if total == 0:
        raise EmptyInput("no words to bin")
    return LengthHistogram(bins=bins, masses=tuple(c / total for c in counts))


@dataclass(frozen=True)
class WordFrequencyList:
    """Frequency-ranked lowercase word list for the random condition."""

    words: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.words:
            raise EmptyInput("word list is empty")
        seen = set()
        for word in self.words:
            if word != word.lower():
                raise ValueError(f"word list must be lowercase: {word!r}")
            if word in seen:
                raise ValueError(f"duplicate word: {word!r}")
            seen.add(word)

    @classmethod
    def from_file(cls, path: str | Path, cap: int = 1266) -> "WordFrequencyList":
        words = []
        seen = set()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                word = line.strip().lower()
                if not word or word in seen:
                    continue
                seen.add(word)
                words.append(word)
                if len(words) >= cap:
                    break
        return cls(words=tuple(words))

    @classmethod
    def from_corpus(cls, corpus_text: str, cap: int = 1266) -> "WordFrequencyList":
        counts: Counter = Counter()
        for tokens in _sentence_token_lists(corpus_text):
            counts.update(tokens)
        if not counts:
            raise EmptyCorpus("no words in corpus text")
        ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
        return cls(words=tuple(w for w, _ in ranked[:cap]))

    def in_bin(
        self, lo: int, hi: Optional[int]
    ) -> tuple[str, ...]:
        return tuple(
            w for w in self.words if lo <= len(w) and (hi is None or len(w) <= hi)
        )


def sample_length_matched_random(
    histogram: LengthHistogram,
    word_list: WordFrequencyList,
    num_samples: int,
    rng: random.Random,
) -> list[Prediction]:
    """Draw random words whose lengths follow the prediction histogram.

    Per sample: draw a bin by histogram mass, then a word uniformly from
    the list's words in that bin. A drawn bin with no eligible word raises
    EmptyBin (the histogram says such lengths occur; the list cannot serve
    them, and silently renormalizing would skew lengths).
    """
    eligible = [word_list.in_bin(lo, hi) for lo, hi in histogram.bins]
    bin_indices = range(len(histogram.bins))
    predictions = []
    for sample_index in range(1, num_samples + 1):
        b = rng.choices(bin_indices, weights=histogram.masses, k=1)[0]
        words = eligible[b]
        if not words:
            lo, hi = histogram.bins[b]
            raise EmptyBin(f"no list word with length in [{lo}, {hi}]")
        word = words[rng.randrange(len(words))]
        predictions.append(Prediction(word, sample_index, PredictionSource.RANDOM))
    return predictions


def prediction_rate(
    predicted: Sequence[str], truths: Sequence[Optional[str]]
) -> float:
    """Fraction of slots where the prediction matches the true next word.

    Comparison is case-folded and punctuation-stripped; a slot with no true
    next word (None) never matches.
    """
    if len(predicted) != len(truths):
        raise LengthMismatch(
            f"{len(predicted)} predictions vs {len(truths)} truths"
        )
    if not predicted:
        raise EmptyInput("no slots to score")
    hits = 0
    for word, truth in zip(predicted, truths):
        if truth is None:
            continue
        if normalize_for_match(word) == normalize_for_match(truth):
            hits += 1
    return hits / len(predicted)
