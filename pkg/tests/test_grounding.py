# -*- coding: utf-8 -*-
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from data.records import RuleBlock, RuleSet
from insight.grounding import (
    Archetype,
    Verdict,
    adversarial_summary,
    classify_archetype,
    clean_band,
    normalize_tokens,
    overlap_score,
    two_layer_verdict,
    verify_frame,
)
from util.errors import DataError, ErrorCode

RULES = RuleSet(
    "c1",
    platform_rules=(RuleBlock("platform/P1", "No spam or self-promotion links."),),
    community_rules=(
        RuleBlock("c1/C1", "Posts must be relevant to the topic of the community."),
        RuleBlock("c1/C2", "alpha beta gamma delta epsilon zeta eta"),
    ),
)


@pytest.mark.parametrize("text,expected", [
    ("Rule 3: No spam", ["rule", "3", "no", "spam"]),
    ("", []),
    ("self-promotion/ads", ["self", "promotion", "ads"]),
])
def test_normalize_examples(text, expected):
    assert normalize_tokens(text) == expected


def test_verbatim_copy_scores_one():
    assert overlap_score("Posts must be relevant to the topic of the community.", RULES) == ("c1/C1", 1.0)


def test_no_shared_token_scores_zero():
    rule_id, score = overlap_score("zorath quixumb", RULES)
    assert score == 0.0
    assert rule_id == "platform/P1"


def test_partial_overlap_fraction():
    citation = "alpha beta gamma delta epsilon zeta eta one two three"
    assert overlap_score(citation, RULES) == ("c1/C2", pytest.approx(0.7))


def test_empty_citation_is_an_error():
    with pytest.raises(DataError) as exc:
        overlap_score(" -- ", RULES)
    assert exc.value.code is ErrorCode.EMPTY_CITATION


def test_no_blocks_gives_zero():
    assert overlap_score("anything", RuleSet("empty")) == (None, 0.0)


words = st.lists(st.sampled_from(["spam", "links", "topic", "posts", "zorath", "alpha", "eta"]), min_size=1, max_size=12)


@given(words)
def test_overlap_ignores_case_order_and_repeats(tokens):
    base = overlap_score(" ".join(tokens), RULES)
    shuffled = overlap_score(" ".join(reversed(tokens)).upper(), RULES)
    repeated = overlap_score(" ".join(tokens + tokens), RULES)
    assert base[1] == shuffled[1] == repeated[1]
    assert 0.0 <= base[1] <= 1.0


@pytest.mark.parametrize("s,overlap,verdict", [
    (0.002, 0.0, Verdict.FLAG_BOTH),
    (0.795, 0.741, Verdict.CLEAN),
    (0.95, 1.0, Verdict.CLEAN),
    (0.05, 0.9, Verdict.FLAG_PDS),
    (0.5, 0.2, Verdict.FLAG_GROUNDING),
])
def test_two_layer_verdicts(s, overlap, verdict):
    assert two_layer_verdict(s, overlap) is verdict
    assert two_layer_verdict(s, overlap).flagged is (verdict is not Verdict.CLEAN)


@pytest.mark.parametrize("h_kappa,s,overlap,archetype", [
    (0.021, 0.002, 0.0, Archetype.LOW_ENTROPY_FABRICATION),
    (0.129, 0.795, 0.741, Archetype.POLICY_PENUMBRA),
    (3.0, 0.5, 0.5, Archetype.UNCLASSIFIED),
])
def test_archetypes(h_kappa, s, overlap, archetype):
    assert classify_archetype(h_kappa, s, overlap) is archetype


def test_clean_band_is_p95():
    assert clean_band([0.1 * i for i in range(21)]) == (0.0, pytest.approx(1.9))
    assert clean_band([]) == (0.0, 0.25)


def test_verify_frame_and_summary():
    frame = pd.DataFrame({
        "id": ["ok", "fake", "unscored"],
        "community_id": ["c1", "c1", "c1"],
        "citation": ["Posts must be relevant to the topic", "zorath quixumb velix", "spam"],
        "h_kappa": [0.3, 0.01, 0.2],
    })
    scores = pd.Series([0.9, 0.6, None], dtype=float)
    verdicts = verify_frame(frame, {"c1": RULES}, scores)
    assert verdicts["id"].tolist() == ["ok", "fake"]
    assert verdicts["verdict"].tolist() == ["CLEAN", "FLAG_GROUNDING"]
    assert verdicts.loc[0, "matched_rule"] == "c1/C1"

    truth = pd.DataFrame({"record_id": ["ok", "fake"], "adversarial": ["clean", "hallucinated"]})
    summary = adversarial_summary(verdicts, truth).set_index("label")
    assert summary.loc["hallucinated", "Flag rate (%)"] == 100.0
    assert summary.loc["clean", "Flag rate (%)"] == 0.0
    assert summary.loc["hallucinated", "FLAG_GROUNDING"] == 1


def test_unknown_community_scores_zero_overlap():
    frame = pd.DataFrame({"id": ["x"], "community_id": ["other"], "citation": ["spam"], "h_kappa": [0.1]})
    verdicts = verify_frame(frame, {"c1": RULES}, pd.Series([0.9]))
    assert verdicts.loc[0, "overlap (prob)"] == 0.0
    assert verdicts.loc[0, "verdict"] == "FLAG_GROUNDING"
