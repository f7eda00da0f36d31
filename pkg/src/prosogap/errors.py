"""Exception and warning types shared across the pipeline."""

from __future__ import annotations


class ProsogapError(Exception):
    """Base class for all library errors."""


# corpus / conditions

class EmptyUtterance(ProsogapError):
    """Text contained no tokens after whitespace splitting."""


class IndexOutOfRange(ProsogapError):
    """Target token index n outside 1..N."""


class SuffixLengthMismatch(ProsogapError):
    """Predicted/random suffix length does not equal the lookahead k."""


class MissingPredictions(ProsogapError):
    """Prediction cache lacks entries for some (utterance, n)."""


# predictor

class BackendUnavailable(ProsogapError):
    """A remote backend could not be reached or answered with an error."""


class FilterExhausted(ProsogapError):
    """Retry budget spent without a sample passing the word filter."""


class EmptyBin(ProsogapError):
    """No word in the list falls into the drawn length bin."""


class EmptyCorpus(ProsogapError):
    """No usable tokens found when training or counting."""


class LengthMismatch(ProsogapError):
    """Parallel sequences have different lengths."""


class EmptyInput(ProsogapError):
    """A non-empty input sequence is required."""


# synthesis

class InvalidText(ProsogapError):
    """Input text is empty or contains no synthesizable characters."""


class NonContiguousWordIndices(ProsogapError):
    """Phoneme word indices decrease or fall outside the token range."""


class WordOutOfRange(ProsogapError):
    """Requested word index outside the synthesized sequence."""


# assembly

class RateMismatch(ProsogapError):
    """Waveforms to concatenate carry different sample rates."""


class ChunkTooShort(ProsogapError):
    """A chunk is shorter than the crossfade overlap."""


class ClippedInput(ProsogapError):
    """Samples outside [-1, 1] cannot be written losslessly."""


# metrics

class SymbolMismatch(ProsogapError):
    """Phoneme symbol sequences differ position-wise."""


class DimensionMismatch(ProsogapError):
    """Feature matrices disagree on bin count (or are empty)."""


class SpanOutOfRange(ProsogapError):
    """Sample span outside the waveform (or empty)."""


class RateTooLow(ProsogapError):
    """Sample rate cannot represent the requested pitch ceiling."""


class NoVoicedOverlap(ProsogapError):
    """No aligned frame pair is voiced in both tracks."""


class MissingLabels(ProsogapError):
    """Error records and prediction labels are not parallel."""


class EmptyPartitionWarning(UserWarning):
    """One side of a correctness split received no items."""


# sensitivity

class NonPositivePitch(ProsogapError):
    """Pitch range in cents needs strictly positive pitch values."""


class MissingBase(ProsogapError):
    """Relative duration JND needs a base duration that was not given."""


class DegenerateScale(ProsogapError):
    """Z-scoring needs nonzero variance."""


class DegenerateInput(ProsogapError):
    """Correlation needs at least two points and nonzero variance."""


# experiment orchestration

class ConfigError(ProsogapError):
    """Configuration file missing, unreadable or invalid."""


class MissingArtifacts(ProsogapError):
    """A pipeline stage needs outputs of an earlier stage."""


class UnknownSentenceId(ProsogapError):
    """Requested sentence id is not in the corpus."""


# listening-test service

class NoTrialsLoaded(ProsogapError):
    """The service has no trial bundle to serve."""


class DuplicateSubmission(ProsogapError):
    """This listener already rated this trial."""


class IncompleteRatings(ProsogapError):
    """A submission must score every slot of the trial exactly once."""


class ScoreOutOfRange(ProsogapError):
    """Scores must be integers in 0..100."""


class EmptyAfterScreening(ProsogapError):
    """Screening removed every listener; no stats to report."""
