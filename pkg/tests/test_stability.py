# -*- coding: utf-8 -*-
import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from data.records import DefensibilityLevel, InverseCheck
from insight.stability import (
    CaseGroup,
    FlatnessVerdict,
    Replicate,
    ReplicateSet,
    StabilityClass,
    classify_stability,
    group_ratio,
    groups_from_truth,
    is_boundary_unstable,
    ratio_flatness_test,
    sigma_pds,
    sigma_ratio,
    spearman,
    stability_profile,
    sweep_cases_from_frame,
    temperature_sweep_table,
)
from util.errors import DataError, ErrorCode

L1, L2, L3 = DefensibilityLevel.L1, DefensibilityLevel.L2, DefensibilityLevel.L3


def _set(levels, scores=None, case_id="case"):
    scores = scores if scores is not None else [0.5] * len(levels)
    reps = tuple(Replicate(None, s, lv, InverseCheck.NO) for s, lv in zip(scores, levels))
    return ReplicateSet(case_id, 0.1, reps)


@pytest.mark.parametrize("scores,expected", [
    ([0.8, 0.8, 0.8], 0.0),
    ([0.0, 1.0], 0.7071),
    ([0.2, 0.4, 0.6, 0.8], 0.2582),
])
def test_sigma_examples(scores, expected):
    assert sigma_pds(scores) == pytest.approx(expected, abs=1e-4)


def test_sigma_needs_two_replicates():
    with pytest.raises(DataError) as exc:
        sigma_pds([0.5])
    assert exc.value.code is ErrorCode.TOO_FEW_REPLICATES


@settings(max_examples=10_000, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=50))
def test_sigma_matches_two_pass(scores):
    mean = math.fsum(scores) / len(scores)
    expected = math.sqrt(math.fsum((x - mean) ** 2 for x in scores) / (len(scores) - 1))
    assert sigma_pds(scores) == pytest.approx(expected, rel=1e-12, abs=1e-15)
    assert sigma_pds(scores) == pytest.approx(float(np.std(scores, ddof=1)), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("fraction,expected", [
    (0.96, StabilityClass.ROCK_SOLID),
    (0.95, StabilityClass.ROCK_SOLID),
    (0.80, StabilityClass.MOSTLY_STABLE),
    (0.60, StabilityClass.MODERATE),
    (0.59, StabilityClass.HIGHLY_UNSTABLE),
])
def test_stability_class_bounds(fraction, expected):
    assert classify_stability(fraction) is expected


@pytest.mark.parametrize("p_l3,expected", [(0.04, False), (0.10, False), (0.5, True), (0.90, False), (0.11, True)])
def test_boundary_interval_is_open(p_l3, expected):
    assert is_boundary_unstable(p_l3) is expected


def test_rock_solid_profile():
    profile = stability_profile(_set([L1] * 96 + [L3] * 4))
    assert profile.stability_class is StabilityClass.ROCK_SOLID
    assert profile.p_l3 == pytest.approx(0.04)
    assert not profile.boundary_unstable
    assert profile.sigma_pds == 0.0


def test_dominant_level_tie_goes_to_lowest():
    profile = stability_profile(_set([L2, L3, L2, L3]))
    assert profile.dominant_level is L2
    assert profile.boundary_unstable


@pytest.mark.parametrize("x,y,expected", [
    ([1, 2, 3], [3, 2, 1], -1.0),
    ([1, 2, 3, 4], [1, 2, 3, 4], 1.0),
    ([1, 2, 2, 4], [1, 3, 3, 4], 1.0),
])
def test_spearman_examples(x, y, expected):
    assert spearman(x, y) == pytest.approx(expected)


@pytest.mark.parametrize("x,y,code", [
    ([1, 2], [1, 2], ErrorCode.TOO_FEW_SAMPLES),
    ([1, 2, 3], [1, 2], ErrorCode.LENGTH_MISMATCH),
    ([1, 1, 1], [1, 2, 3], ErrorCode.ZERO_VARIANCE),
])
def test_spearman_errors(x, y, code):
    with pytest.raises(DataError) as exc:
        spearman(x, y)
    assert exc.value.code is code


@given(
    st.lists(st.floats(min_value=-100, max_value=100), min_size=3, max_size=20, unique=True),
    st.lists(st.floats(min_value=-100, max_value=100), min_size=3, max_size=20, unique=True),
)
def test_spearman_is_rank_invariant(x, y):
    n = min(len(x), len(y))
    x, y = np.array(x[:n]), np.array(y[:n])
    assert spearman(2.0 * x, y) == pytest.approx(spearman(x, y))
    assert spearman(-x, y) == pytest.approx(-spearman(x, y))
    assert -1.0 <= spearman(x, y) <= 1.0


def test_ratio_examples():
    assert sigma_ratio([0.2263], [0.1391]) == pytest.approx(1.627, abs=1e-3)
    assert sigma_ratio([0.1, 0.3], [0.3, 0.1]) == pytest.approx(1.0)
    with pytest.raises(DataError) as exc:
        sigma_ratio([0.1], [0.0, 0.0])
    assert exc.value.code is ErrorCode.ZERO_DENOMINATOR
    with pytest.raises(DataError) as exc:
        sigma_ratio([], [0.1])
    assert exc.value.code is ErrorCode.EMPTY_GROUP


def test_group_ratio_uses_labels():
    profiles = {
        "f": stability_profile(_set([L1, L3], [0.0, 1.0])),
        "s": stability_profile(_set([L1, L1], [0.4, 0.6])),
    }
    groups = {"f": CaseGroup.FLIPPER, "s": CaseGroup.STABLE}
    assert group_ratio(profiles, groups) == pytest.approx(math.sqrt(0.5) / math.sqrt(0.02))


def test_flatness_examples():
    flat = ratio_flatness_test({0.1: 1.63, 0.3: 1.64, 0.7: 1.57, 1.0: 1.52})
    assert flat.verdict is FlatnessVerdict.FLAT
    assert flat.range == pytest.approx(0.12)
    converging = ratio_flatness_test({0.1: 1.6, 0.3: 1.3, 0.7: 1.1, 1.0: 1.0})
    assert converging.verdict is FlatnessVerdict.CONVERGING
    assert converging.slope < 0
    pair = ratio_flatness_test({0.1: 1.5, 1.0: 1.5})
    assert pair.verdict is FlatnessVerdict.FLAT
    assert pair.range == 0.0
    drifting = ratio_flatness_test({0.1: 1.2, 1.0: 2.0})
    assert drifting.verdict is FlatnessVerdict.DRIFTING


def _replicate_frame():
    rows = []
    for case_id, levels in (("flip", ["L1", "L3"] * 5), ("calm", ["L1"] * 10)):
        for t in (0.1, 1.0):
            for k, level in enumerate(levels):
                rows.append({
                    "id": f"{case_id}-{t}-{k}", "case_id": case_id, "temperature": t,
                    "level": level, "inverse_check": "No",
                    "S": 0.9 if level == "L1" else 0.3,
                    "h_kappa": 0.5 if case_id == "flip" else 0.1,
                })
    return pd.DataFrame(rows)


def test_sweep_table_from_frame():
    frame = _replicate_frame()
    cases = sweep_cases_from_frame(frame)
    assert len(cases) == 4
    groups = groups_from_truth(None, cases)
    assert groups == {"flip": CaseGroup.FLIPPER, "calm": CaseGroup.STABLE}
    table = temperature_sweep_table(cases, groups)
    assert list(table.columns) == ["Metric", "T=0.1", "T=1"]
    row = table.set_index("Metric").loc["Boundary flip rate, interval def. (Flippers, %)"]
    assert row.tolist() == [100.0, 100.0]
    di = table.set_index("Metric").loc["Aggregate DI (%)"]
    assert di.tolist() == pytest.approx([75.0, 75.0])


def test_truth_groups_take_precedence():
    cases = sweep_cases_from_frame(_replicate_frame())
    truth = pd.DataFrame({"record_id": ["x"], "case_id": ["calm"], "group": ["FLIPPER"]})
    groups = groups_from_truth(truth, cases)
    assert groups["calm"] is CaseGroup.FLIPPER
    assert groups["flip"] is CaseGroup.FLIPPER
