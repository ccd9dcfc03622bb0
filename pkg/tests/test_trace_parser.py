# -*- coding: utf-8 -*-
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import expit

from data.preprocess import ExtractionStatus, assemble_pds
from data.records import DefensibilityLevel, InverseCheck, PrecedentWeight
from data.trace_parser import (
    build_audit_trace,
    find_citation_span,
    locate_field_token,
    map_span_to_tokens,
    parse_trace,
    render_trace,
)
from util.errors import DataError, ErrorCode

from tests.conftest import build_record, golden_pieces


def _span_text(text):
    start, end = find_citation_span(text)
    return text[start:end]


TAIL = ', "precedent_weight": "High", "inverse_check": "No", "defensibility_level": "1"}'
COMPACT_TAIL = ',"precedent_weight":"High","inverse_check":"No","defensibility_level":"1"}'


def _spaced(logic, citation, tail=TAIL):
    # citation 값은 40 + len(logic)에서 시작한다
    return '{"logic_chain": "' + logic + '", "policy_citation": "' + citation + '"' + tail


def _compact(logic, citation):
    # citation 값은 37 + len(logic)에서 시작한다
    return '{"logic_chain":"' + logic + '","policy_citation":"' + citation + '"' + COMPACT_TAIL


# (트레이스 원문, 시작, 끝): 오프셋은 손으로 센 값
SPAN_CORPUS = [
    (_spaced("x", "No spam"), 41, 48),
    (_spaced("a", ""), 41, 41),
    (_spaced("ab", "R"), 42, 43),
    (_spaced("checked rule", "No spam"), 52, 59),
    (_spaced("x", r'say \"hi\" twice'), 41, 57),
    (_spaced("x", r'back\\slash'), 41, 52),
    (_spaced("x", r'ends with \\'), 41, 53),
    (_spaced("x", r'\"'), 41, 43),
    (_spaced("x", r'\\\"'), 41, 45),
    (_spaced(r'see \"policy_citation\": \"fake\"', "Rule 2"), 73, 79),
    (_spaced(r'mentions \"policy_citation\" inline', "Rule 2"), 75, 81),
    (_spaced("policy_citation", "c"), 55, 56),
    (_spaced("x", "규칙 3"), 41, 45),
    (_spaced("x", r'\u00e9t\u00e9'), 41, 54),
    (_spaced("x", "a, b: c"), 41, 48),
    (_spaced("x", "{not nested}"), 41, 53),
    (_spaced("x", "} ] ["), 41, 46),
    (_spaced("", "No spam"), 40, 47),
    (_spaced("a b c d e", "Rule 1: be civil"), 49, 65),
    (_spaced("x", r'a\tb'), 41, 45),
    (_spaced("x", r'line\nbreak'), 41, 52),
    (_spaced("x", "   "), 41, 44),
    (_spaced("xyz", "No spam"), 43, 50),
    (_spaced("x", "Self-promotion is limited to one post per week"), 41, 87),
    (_compact("a", "tight"), 38, 43),
    (_compact("", "x"), 37, 38),
    (_compact("abc", r'q\"q'), 40, 44),
    (_compact("ab", ""), 39, 39),
    ('{"logic_chain" : "a" , "policy_citation" : "wide" , "precedent_weight" : "Low"}', 44, 48),
    ('{\n  "logic_chain": "a",\n  "policy_citation": "Rule 4"\n}', 46, 52),
    ('{"policy_citation":\t"T"}', 21, 22),
    ('{"policy_citation": "only"}', 21, 25),
    ('{"policy_citation": "first", "logic_chain": "a"}', 21, 26),
    ('{"policy_citation": "old", "policy_citation": "new"}', 47, 50),
    ('{"policy_citation": "", "logic_chain": "a", "policy_citation": "b"}', 64, 65),
    (_spaced("x", r'\/'), 41, 43),
    (_spaced("x", r'\"\"\"'), 41, 47),
    (_spaced("x", r'x\\\\'), 41, 46),
    (_spaced("x", "'single'"), 41, 49),
    (_spaced("x", "policy_citation"), 41, 56),
    (_spaced("x", r'\"policy_citation\": \"z\"'), 41, 67),
    (_spaced("Rule 3 cited twice", "Rule 3"), 58, 64),
    (_spaced("x", "emoji \U0001F642"), 41, 48),
    (_spaced("x", "\u00fc"), 41, 42),
    (_compact(r'\"q\"', "r"), 41, 42),
    (_compact("hello world", "No ads"), 48, 54),
    (_spaced("x", "0123456789"), 41, 51),
    (_spaced("1234567890", ""), 50, 50),
    ('{"logic_chain":"a",  "policy_citation"  :  "w"}', 44, 45),
    (_spaced("x", "c", tail=', "precedent_weight": "policy_citation"}'), 41, 42),
]


def test_span_corpus_size():
    assert len(SPAN_CORPUS) == 50


@pytest.mark.parametrize("text,start,end", SPAN_CORPUS)
def test_citation_span_corpus(text, start, end):
    assert find_citation_span(text) == (start, end)


def test_missing_citation_key():
    with pytest.raises(DataError) as exc:
        find_citation_span('{"logic_chain": "a"}')
    assert exc.value.code is ErrorCode.SPAN_NOT_FOUND


def test_unterminated_citation_value():
    with pytest.raises(DataError) as exc:
        find_citation_span('{"policy_citation": "open')
    assert exc.value.code is ErrorCode.SPAN_NOT_FOUND


def test_golden_span_maps_to_citation_tokens(golden_record):
    span = find_citation_span(golden_record.trace_text)
    assert map_span_to_tokens(golden_record, span) == range(1, 3)


def test_boundary_token_is_included():
    pieces = golden_pieces()
    prefix, _, _ = pieces[0]
    # 여는 따옴표를 첫 citation 토큰에 붙인다
    pieces[0] = (prefix[:-1], 0.0, ())
    text, lp, cands = pieces[1]
    pieces[1] = ('"' + text, lp, cands)
    record = build_record(pieces)
    span = find_citation_span(record.trace_text)
    assert map_span_to_tokens(record, span) == range(1, 3)


def test_empty_span_maps_to_empty_range():
    record = build_record(golden_pieces(citation_words=(), citation_cands=()))
    span = find_citation_span(record.trace_text)
    assert span[0] == span[1]
    assert len(map_span_to_tokens(record, span)) == 0


def test_span_beyond_tokens_is_uncovered(golden_record):
    with pytest.raises(DataError) as exc:
        map_span_to_tokens(golden_record, (5, len(golden_record.trace_text) + 3))
    assert exc.value.code is ErrorCode.UNCOVERED_SPAN


def test_parse_golden_fields(golden_record):
    parsed = parse_trace(golden_record.trace_text)
    assert parsed.logic_chain == "checked rule"
    assert parsed.policy_citation == "No spam"
    assert parsed.precedent_weight is PrecedentWeight.HIGH
    assert parsed.inverse_check is InverseCheck.NO
    assert parsed.defensibility_level is DefensibilityLevel.L1
    assert parsed.issues == ()
    assert parsed.diagnostics == ()


@pytest.mark.parametrize("text", ["", "   ", "[1, 2]", '{"a": "b"', '{"a": {"b": 1}}', '{"a": "b"} trailing', '{"a" "b"}'])
def test_malformed_traces(text):
    with pytest.raises(DataError) as exc:
        parse_trace(text)
    assert exc.value.code is ErrorCode.MALFORMED_TRACE


def test_invalid_enum_value_is_an_issue_not_an_error():
    parsed = parse_trace(render_trace("x", "c", "Huge", "Maybe", "4"))
    codes = {name: code for code, name in parsed.issues}
    assert codes == {
        "precedent_weight": ErrorCode.INVALID_VALUE,
        "inverse_check": ErrorCode.INVALID_VALUE,
        "defensibility_level": ErrorCode.INVALID_VALUE,
    }
    assert parsed.precedent_weight is None


def test_missing_fields_are_listed():
    parsed = parse_trace('{"logic_chain": "a", "defensibility_level": "2"}')
    assert parsed.missing == ["policy_citation", "precedent_weight", "inverse_check"]
    assert parsed.defensibility_level is DefensibilityLevel.L2


def test_unquoted_level_digit_is_accepted():
    parsed = parse_trace(
        '{"logic_chain": "a", "policy_citation": "b", "precedent_weight": "Low", '
        '"inverse_check": "Yes", "defensibility_level": 3}'
    )
    assert parsed.defensibility_level is DefensibilityLevel.L3


def test_field_order_violation_is_a_diagnostic():
    text = (
        '{"logic_chain": "a", "precedent_weight": "Low", "policy_citation": "b", '
        '"inverse_check": "Yes", "defensibility_level": "3"}'
    )
    parsed = parse_trace(text)
    assert parsed.issues == ()
    assert any(d.startswith("field order") for d in parsed.diagnostics)


def test_locate_value_tokens(golden_record):
    assert locate_field_token(golden_record, "precedent_weight") == 4
    assert locate_field_token(golden_record, "inverse_check") == 6
    assert locate_field_token(golden_record, "defensibility_level") == 8
    with pytest.raises(ValueError):
        locate_field_token(golden_record, "logic_chain")


def test_value_token_skips_leading_whitespace():
    pieces = golden_pieces()
    # 값 " 1": 공백 토큰 다음의 "1"이 값 토큰
    pieces.insert(8, (" ", -0.01, ((" ", -0.01),)))
    record = build_record(pieces)
    assert parse_trace(record.trace_text).defensibility_level is DefensibilityLevel.L1
    assert locate_field_token(record, "defensibility_level") == 9


def test_build_audit_trace_collects_positions(golden_record):
    trace = build_audit_trace(golden_record)
    assert trace.citation_tokens == range(1, 3)
    assert (trace.weight_token, trace.inverse_token, trace.level_token) == (4, 6, 8)
    assert trace.diagnostics == ()


@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=40))
def test_rendered_citation_round_trips(citation):
    text = render_trace("logic", citation, "High", "No", "1")
    parsed = parse_trace(text)
    assert parsed.policy_citation == citation
    assert json.loads('"' + _span_text(text) + '"') == citation


NULL_CITATION = (
    '{"logic_chain": "a", "policy_citation": null, "precedent_weight": "High", '
    '"inverse_check": "No", "defensibility_level": "1"}'
)


def test_non_string_citation_is_not_a_span():
    with pytest.raises(DataError) as exc:
        find_citation_span(NULL_CITATION)
    assert exc.value.code is ErrorCode.SPAN_NOT_FOUND
    parsed = parse_trace(NULL_CITATION)
    assert (ErrorCode.INVALID_VALUE, "policy_citation") in parsed.issues
    assert parsed.policy_citation is None


def test_non_string_citation_flags_h_kappa():
    record = build_record([(NULL_CITATION, 0.0, ())])
    v = assemble_pds(record)
    assert v.h_kappa is None
    assert v.extraction_flags["h_kappa"] is ExtractionStatus.SPAN_NOT_FOUND


def test_key_must_be_followed_by_colon():
    with pytest.raises(DataError) as exc:
        find_citation_span('{"logic_chain": "policy_citation"}')
    assert exc.value.code is ErrorCode.SPAN_NOT_FOUND


def test_value_split_across_tokens_uses_first_token():
    pieces = golden_pieces()
    pieces[6] = ("Y", -0.3, (("Y", -0.3), ("No", -1.4)))
    pieces.insert(7, ("es", -0.01, ()))
    record = build_record(pieces)
    assert parse_trace(record.trace_text).inverse_check is InverseCheck.YES
    assert locate_field_token(record, "inverse_check") == 6
    assert assemble_pds(record).sigma_rho == pytest.approx(float(expit(1.1)))


def test_citation_before_logic_chain_is_a_diagnostic():
    text = (
        '{"policy_citation": "c", "logic_chain": "a", "precedent_weight": "High", '
        '"inverse_check": "No", "defensibility_level": "1"}'
    )
    trace = build_audit_trace(build_record([(text, 0.0, ())]))
    assert trace.citation_span == (21, 22)
    assert "citation span precedes logic_chain span" in trace.diagnostics


def test_escaped_decoy_in_logic_chain_is_skipped():
    text = _spaced(r'see \"policy_citation\": \"fake\"', "Rule 2")
    trace = build_audit_trace(build_record([(text, 0.0, ())]))
    assert trace.policy_citation == "Rule 2"
    assert trace.citation_span == (73, 79)
    assert "citation span precedes logic_chain span" not in trace.diagnostics
