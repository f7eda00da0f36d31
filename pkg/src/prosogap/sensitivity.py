"""Per-phoneme sensitivity of prosodic features to the next word.

For each phoneme there are twelve feature values: five predicted-future
samples, five random-future samples, the true next word, and the full
sentence. The spread of those twelve (max - min for duration and energy,
cents for pitch) says how much the feature can move when the future is
guessed, and comparing the spread against just-noticeable differences says
whether anyone could hear it.
"""

from __future__ import annotations

import math
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateInput,
    DegenerateScale,
    EmptyInput,
    MissingBase,
    NonPositivePitch,
)

CONDITION_SET_SIZE = 12

PITCH_JND_CENTS = 300.0
DURATION_JND_FRAMES = 1.0
DURATION_JND_RATIO = 0.05


def feature_range(values: Sequence[float], feature: str) -> float:
    """Spread of a phoneme's twelve condition values.

    duration/energy: max - min. pitch: 1200 * log2(max / min) cents, which
    needs strictly positive pitches.
    """
    if len(values) != CONDITION_SET_SIZE:
        raise ValueError(
            f"need exactly {CONDITION_SET_SIZE} values, got {len(values)}"
        )
    if feature == "pitch":
        if min(values) <= 0:
            raise NonPositivePitch("pitch range needs strictly positive values")
        return 1200.0 * math.log2(max(values) / min(values))
    if feature in ("duration", "energy"):
        return float(max(values) - min(values))
    raise ValueError(f"unknown feature {feature!r}")


def jnd_classify(
    range_value: float,
    feature: str,
    base_value: Optional[float] = None,
    pitch_jnd_cents: float = PITCH_JND_CENTS,
    duration_jnd_frames: float = DURATION_JND_FRAMES,
    duration_jnd_ratio: float = DURATION_JND_RATIO,
) -> bool:
    """True when the spread sits at or below the just-noticeable difference.

    Pitch: below iff range <= pitch_jnd_cents. Duration: below iff the
    range is at most one frame, or at most duration_jnd_ratio of the base
    (full-sentence) duration; the relative test needs base_value.
    """
    if feature == "pitch":
        return range_value <= pitch_jnd_cents
    if feature == "duration":
        if range_value <= duration_jnd_frames:
            return True
        if base_value is None:
            raise MissingBase("relative duration JND needs the base duration")
        return range_value / base_value <= duration_jnd_ratio
    raise ValueError(f"no JND defined for feature {feature!r}")


def range_percentiles(
    ranges: Sequence[float], thresholds: Sequence[float]
) -> dict[float, float]:
    """Fraction of ranges at or below each threshold."""
    if len(ranges) == 0:
        raise EmptyInput("no ranges")
    arr = np.asarray(ranges, dtype=np.float64)
    return {
        float(th): float(np.mean(arr <= th)) for th in thresholds
    }


def max_abs_deviation(
    values: Sequence[float], reference: float
) -> float:
    if len(values) == 0:
        raise EmptyInput("no values")
    return float(max(abs(v - reference) for v in values))


def combine_deviation_scores(
    per_feature: Mapping[str, Sequence[float]]
) -> list[float]:
    """Sum of per-feature z-scores, one combined score per data point.

    Each feature's deviations are z-scored across all points (population
    std); a feature with zero variance cannot be scaled.
    """
    if not per_feature:
        raise EmptyInput("no features")
    lengths = {len(v) for v in per_feature.values()}
    if len(lengths) != 1:
        raise ValueError("features must cover the same points")
    n = lengths.pop()
    if n == 0:
        raise EmptyInput("no data points")

    combined = np.zeros(n)
    for feature, values in per_feature.items():
        arr = np.asarray(values, dtype=np.float64)
        std = arr.std()
        if std == 0.0:
            raise DegenerateScale(f"feature {feature!r} has zero variance")
        combined += (arr - arr.mean()) / std
    return [float(v) for v in combined]


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) != len(y):
        raise ValueError(f"{len(x)} vs {len(y)} points")
    if len(x) < 2:
        raise DegenerateInput("need at least two points")
    ax = np.asarray(x, dtype=np.float64)
    ay = np.asarray(y, dtype=np.float64)
    dx = ax - ax.mean()
    dy = ay - ay.mean()
    denom = math.sqrt(float(np.sum(dx * dx)) * float(np.sum(dy * dy)))
    if denom == 0.0:
        raise DegenerateInput("zero variance")
    return float(np.sum(dx * dy) / denom)
