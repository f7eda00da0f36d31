"""Condition-spread, JND classification, and correlation tests."""

import math
import random

import pytest
from hypothesis import given, strategies as st

from prosogap.errors import (
    DegenerateInput,
    DegenerateScale,
    EmptyInput,
    MissingBase,
    NonPositivePitch,
)
from prosogap.sensitivity import (
    CONDITION_SET_SIZE,
    combine_deviation_scores,
    feature_range,
    jnd_classify,
    max_abs_deviation,
    pearson,
    range_percentiles,
)


def twelve(*values):
    out = list(values)
    assert len(out) <= CONDITION_SET_SIZE
    out.extend([out[-1]] * (CONDITION_SET_SIZE - len(out)))
    return out


# -------------------------------------------------------------- feature_range


def test_identical_values_have_zero_range():
    assert feature_range(twelve(3.0), "duration") == 0.0
    assert feature_range(twelve(0.25), "energy") == 0.0
    assert feature_range(twelve(120.0), "pitch") == 0.0


def test_duration_range_is_max_minus_min():
    values = twelve(2.0, 7.0, 4.0, 3.0)
    assert feature_range(values, "duration") == 5.0


def test_pitch_range_octave_is_1200_cents():
    values = twelve(110.0, 220.0, 150.0)
    assert feature_range(values, "pitch") == pytest.approx(1200.0, abs=1e-9)


def test_pitch_range_matches_log_formula():
    values = twelve(100.0, 180.0, 133.0)
    expected = 1200.0 * math.log2(180.0 / 100.0)
    assert feature_range(values, "pitch") == pytest.approx(expected, abs=1e-12)


def test_range_requires_exactly_twelve_values():
    with pytest.raises(ValueError):
        feature_range([1.0] * 11, "duration")
    with pytest.raises(ValueError):
        feature_range([1.0] * 13, "duration")


def test_pitch_range_rejects_non_positive():
    with pytest.raises(NonPositivePitch):
        feature_range(twelve(0.0, 100.0), "pitch")


def test_range_rejects_unknown_feature():
    with pytest.raises(ValueError):
        feature_range(twelve(1.0), "loudness")


@given(st.lists(st.floats(min_value=0.01, max_value=10.0), min_size=12, max_size=12))
def test_range_invariant_under_permutation(values):
    base = feature_range(values, "duration")
    shuffled = list(values)
    random.Random(7).shuffle(shuffled)
    assert feature_range(shuffled, "duration") == base


# --------------------------------------------------------------- jnd_classify


def test_pitch_jnd_boundary_is_inclusive():
    assert jnd_classify(299.0, "pitch") is True
    assert jnd_classify(300.0, "pitch") is True
    assert jnd_classify(301.0, "pitch") is False


def test_duration_jnd_absolute_frame_test():
    assert jnd_classify(1.0, "duration") is True
    assert jnd_classify(0.5, "duration") is True


def test_duration_jnd_relative_test_uses_base():
    # 2 frames spread over a 40-frame base: 5%, at the threshold.
    assert jnd_classify(2.0, "duration", base_value=40.0) is True
    assert jnd_classify(2.0, "duration", base_value=39.0) is False


def test_duration_jnd_relative_test_requires_base():
    with pytest.raises(MissingBase):
        jnd_classify(2.0, "duration")


def test_jnd_rejects_unknown_feature():
    with pytest.raises(ValueError):
        jnd_classify(0.1, "energy")


# ---------------------------------------------------------- range_percentiles


def test_percentiles_count_inclusive_fractions():
    ranges = [0.0, 1.0, 2.0, 3.0, 4.0]
    got = range_percentiles(ranges, [0.0, 2.0, 10.0])
    assert got[0.0] == pytest.approx(0.2)
    assert got[2.0] == pytest.approx(0.6)
    assert got[10.0] == 1.0


def test_percentiles_match_hand_recount():
    rng = random.Random(31)
    ranges = [rng.uniform(0, 500) for _ in range(200)]
    thresholds = [50.0, 150.0, 300.0]
    got = range_percentiles(ranges, thresholds)
    for th in thresholds:
        expected = sum(1 for r in ranges if r <= th) / len(ranges)
        assert got[th] == pytest.approx(expected, abs=1e-15)


def test_percentiles_reject_empty():
    with pytest.raises(EmptyInput):
        range_percentiles([], [1.0])


# --------------------------------------------------------- deviation scoring


def test_max_abs_deviation_picks_largest_gap():
    assert max_abs_deviation([3.0, 7.0, 5.0], 5.0) == 2.0
    assert max_abs_deviation([5.0], 5.0) == 0.0
    with pytest.raises(EmptyInput):
        max_abs_deviation([], 5.0)


def test_combined_scores_match_hand_zscores():
    per_feature = {
        "duration": [1.0, 2.0, 3.0],
        "pitch": [10.0, 30.0, 20.0],
    }
    combined = combine_deviation_scores(per_feature)

    def zscores(values):
        mean = sum(values) / len(values)
        std = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
        return [(v - mean) / std for v in values]

    zd = zscores(per_feature["duration"])
    zp = zscores(per_feature["pitch"])
    expected = [a + b for a, b in zip(zd, zp)]
    assert combined == pytest.approx(expected, abs=1e-12)


def test_combined_scores_sum_to_zero():
    per_feature = {"a": [5.0, 1.0, 9.0, 2.0], "b": [0.1, 0.9, 0.4, 0.2]}
    combined = combine_deviation_scores(per_feature)
    assert sum(combined) == pytest.approx(0.0, abs=1e-9)


def test_zero_variance_feature_cannot_be_scaled():
    with pytest.raises(DegenerateScale):
        combine_deviation_scores({"a": [1.0, 2.0], "b": [4.0, 4.0]})


def test_combined_scores_validation():
    with pytest.raises(EmptyInput):
        combine_deviation_scores({})
    with pytest.raises(EmptyInput):
        combine_deviation_scores({"a": []})
    with pytest.raises(ValueError):
        combine_deviation_scores({"a": [1.0, 2.0], "b": [1.0]})


# -------------------------------------------------------------------- pearson


def test_pearson_perfect_linear():
    x = [1.0, 2.0, 3.0, 4.0]
    assert pearson(x, [2 * v + 1 for v in x]) == pytest.approx(1.0, abs=1e-12)
    assert pearson(x, [-3 * v + 10 for v in x]) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_exact_fixture():
    # Deviations: dx = [-3, -1, 1, 3], dy = [-1, -3, 3, 1].
    # Sum dx*dy = 3 + 3 + 3 + 3 = 12; both sums of squares are 20.
    x = [0.0, 2.0, 4.0, 6.0]
    y = [-1.0, -3.0, 3.0, 1.0]
    assert pearson(x, y) == 0.6


def test_pearson_symmetric():
    x = [0.4, 1.9, 2.2, 3.8, 5.0]
    y = [9.0, 4.2, 5.5, 1.0, 2.4]
    assert pearson(x, y) == pytest.approx(pearson(y, x), abs=1e-15)


def test_pearson_degenerate_inputs():
    with pytest.raises(DegenerateInput):
        pearson([1.0], [2.0])
    with pytest.raises(DegenerateInput):
        pearson([1.0, 1.0], [2.0, 3.0])
    with pytest.raises(ValueError):
        pearson([1.0, 2.0], [1.0])
