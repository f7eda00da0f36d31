"""Sentences, tokenization and lookahead input sequences.

A corpus is a plain-text file, one sentence per line. Tokens are whitespace
separated; punctuation stays attached to its word ("manage,"). For a target
token at position n (1-based) an input sequence carries the first n tokens
plus whatever lookahead the condition grants: nothing, the true future, a
predicted future, a random future, or the whole sentence.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .errors import (
    EmptyUtterance,
    IndexOutOfRange,
    MissingPredictions,
    SuffixLengthMismatch,
)


class ConditionKind(Enum):
    UNKNOWN = "k0"
    GROUND_TRUTH = "gt"
    PREDICTED = "pred"
    RANDOM = "rand"
    FULL = "full"


@dataclass(frozen=True)
class Token:
    surface: str
    index: int  # 1-based position in the utterance


@dataclass(frozen=True)
class Utterance:
    id: str
    raw_text: str
    tokens: tuple[Token, ...]

    def __post_init__(self) -> None:
        if not self.tokens:
            raise EmptyUtterance(f"utterance {self.id!r} has no tokens")

    @property
    def num_tokens(self) -> int:
        return len(self.tokens)

    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)


def tokenize(text: str) -> list[Token]:
    """Split on whitespace runs, keeping punctuation attached to words.

    Raises EmptyUtterance when nothing remains.
    """
    surfaces = text.split()
    if not surfaces:
        raise EmptyUtterance("no tokens in text")
    return [Token(surface=s, index=i + 1) for i, s in enumerate(surfaces)]


def make_utterance(uid: str, text: str) -> Utterance:
    return Utterance(id=uid, raw_text=text, tokens=tuple(tokenize(text)))


def load_corpus(path: str | Path) -> list[Utterance]:
    """Read a one-sentence-per-line UTF-8 corpus.

    The 1-based physical line number becomes the utterance id unless the
    line carries an explicit "id|sentence" prefix. Blank lines are skipped
    without shifting the ids of later lines.
    """
    utterances = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if "|" in line:
                uid, text = line.split("|", 1)
                uid = uid.strip()
            else:
                uid, text = str(lineno), line
            utterances.append(make_utterance(uid, text))
    return utterances


@dataclass(frozen=True)
class LookaheadCondition:
    kind: ConditionKind
    k: int = 0
    sample_index: int = 0  # 1-based for PREDICTED/RANDOM, else 0

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.kind is ConditionKind.UNKNOWN and self.k != 0:
            raise ValueError("unknown-future condition fixes k = 0")
        if self.kind is ConditionKind.FULL and self.k != 0:
            # k is meaningless for the full sentence; normalize instead of
            # letting two spellings of the same condition circulate.
            object.__setattr__(self, "k", 0)
        if self.kind in (ConditionKind.PREDICTED, ConditionKind.RANDOM):
            if self.k < 1:
                raise ValueError(f"{self.kind.value} requires k >= 1")
            if self.sample_index < 1:
                raise ValueError(f"{self.kind.value} requires sample_index >= 1")
        elif self.sample_index != 0:
            raise ValueError(f"{self.kind.value} does not take a sample index")

    @property
    def label(self) -> str:
        if self.kind is ConditionKind.UNKNOWN:
            return "k0"
        if self.kind is ConditionKind.FULL:
            return "full"
        if self.kind is ConditionKind.GROUND_TRUTH:
            return f"gt_k{self.k}"
        return f"{self.kind.value}_k{self.k}_s{self.sample_index}"


@dataclass(frozen=True)
class InputSequence:
    """Tokens actually handed to the synthesizer for one target word."""

    utterance_id: str
    target_index: int  # n, 1-based
    condition: LookaheadCondition
    token_surfaces: tuple[str, ...]

    @property
    def text(self) -> str:
        return " ".join(self.token_surfaces)


def build_sequence(
    utt: Utterance,
    n: int,
    condition: LookaheadCondition,
    suffix: Sequence[str] = (),
) -> InputSequence:
    """Assemble the token window for target position n under a condition.

    The window always starts at token 1 and ends at min(n + k, N) for
    truth-based futures; predicted/random futures append the given suffix
    words, clamped so the sequence never outruns the sentence. The suffix
    must contain exactly k words even when the clamp will drop them all.
    """
    big_n = utt.num_tokens
    if not 1 <= n <= big_n:
        raise IndexOutOfRange(f"n={n} outside 1..{big_n} for utterance {utt.id!r}")

    surfaces = utt.surfaces()
    kind = condition.kind
    if kind is ConditionKind.FULL:
        window = surfaces
    elif kind in (ConditionKind.UNKNOWN, ConditionKind.GROUND_TRUTH):
        window = surfaces[: min(n + condition.k, big_n)]
    else:
        if len(suffix) != condition.k:
            raise SuffixLengthMismatch(
                f"need {condition.k} suffix word(s), got {len(suffix)}"
            )
        for word in suffix:
            if not word or any(ch.isspace() for ch in word):
                raise ValueError(f"suffix word {word!r} is not a single word")
        keep = min(condition.k, big_n - n)
        window = surfaces[:n] + tuple(suffix[:keep])
    return InputSequence(
        utterance_id=utt.id,
        target_index=n,
        condition=condition,
        token_surfaces=tuple(window),
    )


def enumerate_conditions(
    utt: Utterance,
    k: int,
    num_samples: int,
    predicted: Mapping[int, Sequence[Sequence[str]]],
    randoms: Mapping[int, Sequence[Sequence[str]]],
) -> list[InputSequence]:
    """All input sequences for one utterance, in canonical order.

    For each n in 1..N: unknown future, ground truth, predicted samples
    1..num_samples, random samples 1..num_samples; then a single full
    sequence last. That is N * (2 + 2 * num_samples) + 1 sequences.

    `predicted` / `randoms` map n to a list of suffix chains (one chain of
    k words per sample); every n must be present with at least num_samples
    chains, including n = N where the clamp discards them.
    """
    big_n = utt.num_tokens
    for source_name, source in (("predicted", predicted), ("randoms", randoms)):
        for n in range(1, big_n + 1):
            chains = source.get(n)
            if chains is None or len(chains) < num_samples:
                raise MissingPredictions(
                    f"{source_name} cache for utterance {utt.id!r} lacks "
                    f"{num_samples} sample(s) at n={n}"
                )

    sequences = []
    for n in range(1, big_n + 1):
        sequences.append(build_sequence(utt, n, LookaheadCondition(ConditionKind.UNKNOWN)))
        sequences.append(
            build_sequence(utt, n, LookaheadCondition(ConditionKind.GROUND_TRUTH, k=k))
        )
        for s in range(1, num_samples + 1):
            cond = LookaheadCondition(ConditionKind.PREDICTED, k=k, sample_index=s)
            sequences.append(build_sequence(utt, n, cond, suffix=predicted[n][s - 1]))
        for s in range(1, num_samples + 1):
            cond = LookaheadCondition(ConditionKind.RANDOM, k=k, sample_index=s)
            sequences.append(build_sequence(utt, n, cond, suffix=randoms[n][s - 1]))
    sequences.append(build_sequence(utt, big_n, LookaheadCondition(ConditionKind.FULL)))
    return sequences
