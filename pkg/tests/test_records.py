# -*- coding: utf-8 -*-
from dataclasses import replace

from data.records import (
    DefensibilityLevel,
    ProposedAction,
    RuleBlock,
    RuleSet,
    TokenCandidate,
    TokenEvent,
    dumps_record,
    is_valid_audit,
    loads_record,
    validate_record,
)
from data.trace_parser import build_audit_trace

from tests.conftest import build_record, golden_pieces


def _fields(violations):
    return {v.field.split(".")[0] for v in violations}


def test_golden_record_has_no_violations(golden_record):
    trace = build_audit_trace(golden_record)
    assert validate_record(golden_record, trace) == []
    assert is_valid_audit(golden_record, trace)


def test_positive_logprob_is_reported(golden_record):
    tokens = list(golden_record.tokens)
    t = tokens[1]
    tokens[1] = replace(t, logprob=0.3)
    found = validate_record(replace(golden_record, tokens=tuple(tokens)))
    assert any(v.invariant == "logprob <= 0" for v in found)


def test_unsorted_candidates_are_reported(golden_record):
    tokens = list(golden_record.tokens)
    t = tokens[1]
    tokens[1] = replace(t, top_candidates=tuple(reversed(t.top_candidates)))
    found = validate_record(replace(golden_record, tokens=tuple(tokens)))
    assert any("sorted descending" in v.invariant for v in found)


def test_too_many_candidates_are_reported(golden_record):
    tokens = list(golden_record.tokens)
    tokens[1] = replace(tokens[1], top_candidates=tuple(TokenCandidate(str(i), -1.0 - i) for i in range(21)))
    found = validate_record(replace(golden_record, tokens=tuple(tokens)))
    assert any("at most 20" in v.invariant for v in found)


def test_gap_between_spans_is_reported(golden_record):
    tokens = list(golden_record.tokens)
    first = tokens[0]
    tokens[0] = TokenEvent(first.text[:-1], 0.0, (), 0, len(first.text) - 1)
    found = validate_record(replace(golden_record, tokens=tuple(tokens)))
    assert any("contiguous" in v.invariant for v in found)


def test_span_text_must_match_slice(golden_record):
    tokens = list(golden_record.tokens)
    tokens[1] = replace(tokens[1], text="Xo")
    found = validate_record(replace(golden_record, tokens=tuple(tokens)))
    assert any("trace_text slice" in v.invariant for v in found)


def test_temperature_out_of_range(golden_record):
    assert "temperature" in _fields(validate_record(replace(golden_record, temperature=2.5)))
    assert validate_record(replace(golden_record, temperature=0.0)) == []
    assert validate_record(replace(golden_record, temperature=2.0)) == []


def test_empty_ids_are_reported(golden_record):
    found = validate_record(replace(golden_record, id="", community_id=""))
    assert {"id", "community_id"} <= _fields(found)


def test_out_of_order_fields_are_not_valid_positions(golden_record):
    trace = build_audit_trace(golden_record)
    swapped = replace(trace, weight_token=trace.level_token, level_token=trace.weight_token)
    found = validate_record(golden_record, swapped)
    assert any("generation order" in v.invariant for v in found)


def test_missing_field_is_not_a_valid_audit():
    pieces = golden_pieces()
    text = "".join(p[0] for p in pieces).replace(', "inverse_check": "No"', "")
    record = build_record([(text, 0.0, ())])
    trace = build_audit_trace(record)
    assert trace.inverse_check is None
    assert not is_valid_audit(record, trace)
    assert not is_valid_audit(record, None)


def test_jsonl_line_preserves_record(golden_record):
    record = replace(golden_record, human_action=ProposedAction.APPROVE, case_id="case-1")
    assert loads_record(dumps_record(record)) == record


def test_level_helpers():
    assert DefensibilityLevel.from_digit("2") is DefensibilityLevel.L2
    assert DefensibilityLevel.L3.index == 3
    assert DefensibilityLevel.L2.is_defensible
    assert not DefensibilityLevel.L3.is_defensible


def test_rule_set_blocks_are_ordered():
    rs = RuleSet(
        "c1",
        platform_rules=(RuleBlock("p", "a"),),
        community_rules=(RuleBlock("c", "b"),),
        precedents=(RuleBlock("k", "c"),),
    )
    assert [b.rule_id for b in rs.blocks] == ["p", "c", "k"]
    assert rs.violations() == []
    assert RuleSet("", (RuleBlock("x", ""),)).violations()
