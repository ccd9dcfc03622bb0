# -*- coding: utf-8 -*-
"""감사 트레이스 스캐너.

트레이스는 다섯 필드로 된 평면 JSON 객체다. 범용 파서 대신 가벼운 스캐너를 쓰고,
policy_citation 구간은 문자 오프셋 기반(마지막 등장 키 + 이스케이프되지 않은 따옴표)으로 찾는다.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from data.records import (
    TRACE_FIELDS,
    AuditRecord,
    AuditTrace,
    DefensibilityLevel,
    InverseCheck,
    PrecedentWeight,
)
from util.errors import DataError, ErrorCode

logger = logging.getLogger(__name__)

CITATION_KEY = '"policy_citation"'


@dataclass(frozen=True)
class FieldValue:
    raw: str
    value_start: int
    value_end: int
    key_start: int
    quoted: bool


@dataclass(frozen=True)
class ParsedTrace:
    logic_chain: Optional[str]
    policy_citation: Optional[str]
    precedent_weight: Optional[PrecedentWeight]
    inverse_check: Optional[InverseCheck]
    defensibility_level: Optional[DefensibilityLevel]
    fields: Dict[str, FieldValue] = field(default_factory=dict)
    issues: Tuple[Tuple[ErrorCode, str], ...] = ()
    diagnostics: Tuple[str, ...] = ()

    @property
    def missing(self) -> List[str]:
        return [name for code, name in self.issues if code is ErrorCode.MISSING_FIELD]


def _scan_string(text: str, pos: int) -> int:
    """pos는 여는 따옴표 다음 위치. 닫는 따옴표 위치를 돌려주고 없으면 -1."""
    i = pos
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\\":
            i += 2
            continue
        if ch == '"':
            return i
        i += 1
    return -1


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _malformed(message: str) -> DataError:
    return DataError(ErrorCode.MALFORMED_TRACE, message)


def scan_fields(trace_text: str) -> Dict[str, FieldValue]:
    """평면 객체의 key: value 쌍을 훑어 필드별 원문 값과 오프셋을 모은다. 중복 키는 마지막 값."""
    text = trace_text
    pos = _skip_ws(text, 0)
    if pos >= len(text) or text[pos] != "{":
        raise _malformed("트레이스가 '{'로 시작하지 않습니다")
    pos += 1
    found: Dict[str, FieldValue] = {}
    while True:
        pos = _skip_ws(text, pos)
        if pos >= len(text):
            raise _malformed("객체가 닫히지 않았습니다")
        if text[pos] == "}":
            pos += 1
            break
        if text[pos] != '"':
            raise _malformed(f"{pos}번째 문자에서 키를 기대했습니다")
        key_start = pos
        key_end = _scan_string(text, pos + 1)
        if key_end < 0:
            raise _malformed("키 문자열이 끝나지 않았습니다")
        key = text[pos + 1:key_end]
        pos = _skip_ws(text, key_end + 1)
        if pos >= len(text) or text[pos] != ":":
            raise _malformed(f"키 '{key}' 뒤에 ':'가 없습니다")
        pos = _skip_ws(text, pos + 1)
        if pos >= len(text):
            raise _malformed(f"키 '{key}'의 값이 없습니다")
        if text[pos] == '"':
            end = _scan_string(text, pos + 1)
            if end < 0:
                raise _malformed(f"키 '{key}'의 문자열 값이 끝나지 않았습니다")
            found[key] = FieldValue(text[pos + 1:end], pos + 1, end, key_start, True)
            pos = end + 1
        else:
            if text[pos] in "{[":
                raise _malformed("중첩 값은 지원하지 않습니다")
            end = pos
            while end < len(text) and text[end] not in ",}":
                end += 1
            raw = text[pos:end].rstrip()
            if not raw:
                raise _malformed(f"키 '{key}'의 값이 비어 있습니다")
            found[key] = FieldValue(raw, pos, pos + len(raw), key_start, False)
            pos = end
        pos = _skip_ws(text, pos)
        if pos < len(text) and text[pos] == ",":
            pos += 1
            continue
        if pos < len(text) and text[pos] == "}":
            pos += 1
            break
        raise _malformed(f"{pos}번째 문자에서 ',' 또는 '}}'를 기대했습니다")
    if _skip_ws(text, pos) != len(text):
        raise _malformed("객체 뒤에 추가 텍스트가 있습니다")
    return found


def _decode(fv: FieldValue) -> str:
    if not fv.quoted:
        return fv.raw
    try:
        return json.loads('"' + fv.raw + '"')
    except json.JSONDecodeError as exc:
        raise _malformed(f"문자열 이스케이프 오류: {exc}") from exc


def parse_trace(trace_text: str) -> ParsedTrace:
    """트레이스 텍스트에서 다섯 필드를 뽑는다.

    형식이 깨졌으면 MALFORMED_TRACE를 던진다. 누락 필드와 허용 밖 값은
    issues에 (코드, 필드명)으로 남기고 해당 값은 None이 된다.
    순서 위반은 diagnostics로만 보고한다.
    """
    if not trace_text or not trace_text.strip():
        raise _malformed("빈 트레이스입니다")
    fields = scan_fields(trace_text)
    issues: List[Tuple[ErrorCode, str]] = []
    diagnostics: List[str] = []

    values: Dict[str, object] = {}
    for name in TRACE_FIELDS:
        fv = fields.get(name)
        if fv is None:
            issues.append((ErrorCode.MISSING_FIELD, name))
            values[name] = None
            continue
        decoded = _decode(fv)
        if name in ("logic_chain", "policy_citation"):
            if not fv.quoted:
                issues.append((ErrorCode.INVALID_VALUE, name))
                values[name] = None
                continue
            values[name] = decoded
            continue
        trimmed = decoded.strip()
        try:
            if name == "precedent_weight":
                values[name] = PrecedentWeight(trimmed)
            elif name == "inverse_check":
                values[name] = InverseCheck(trimmed)
            else:
                values[name] = DefensibilityLevel.from_digit(trimmed)
        except (ValueError, KeyError):
            issues.append((ErrorCode.INVALID_VALUE, name))
            values[name] = None

    present = [name for name in TRACE_FIELDS if name in fields]
    by_offset = sorted(present, key=lambda n: fields[n].key_start)
    if by_offset != present:
        diagnostics.append("field order: expected " + " -> ".join(present) + ", found " + " -> ".join(by_offset))

    return ParsedTrace(
        logic_chain=values["logic_chain"],
        policy_citation=values["policy_citation"],
        precedent_weight=values["precedent_weight"],
        inverse_check=values["inverse_check"],
        defensibility_level=values["defensibility_level"],
        fields=fields,
        issues=tuple(issues),
        diagnostics=tuple(diagnostics),
    )


def _last_citation_key(trace_text: str) -> Tuple[int, int]:
    """뒤에서부터 ':'가 뒤따르는 "policy_citation" 등장을 찾는다. (키 위치, ':' 위치)."""
    end = len(trace_text)
    while True:
        key_at = trace_text.rfind(CITATION_KEY, 0, end)
        if key_at < 0:
            raise DataError(ErrorCode.SPAN_NOT_FOUND, "policy_citation 키가 없습니다")
        colon = _skip_ws(trace_text, key_at + len(CITATION_KEY))
        if colon < len(trace_text) and trace_text[colon] == ":":
            return key_at, colon
        # 값 문자열로 등장한 경우는 건너뛴다
        end = key_at


def find_citation_span(trace_text: str) -> Tuple[int, int]:
    """마지막 "policy_citation" 키 뒤 값의 내부 문자 구간(따옴표 제외).

    키와 여는 따옴표 사이에는 공백과 ':'만 올 수 있다. 값이 문자열이 아니면 SPAN_NOT_FOUND.
    """
    _, colon = _last_citation_key(trace_text)
    open_quote = _skip_ws(trace_text, colon + 1)
    if open_quote >= len(trace_text) or trace_text[open_quote] != '"':
        raise DataError(ErrorCode.SPAN_NOT_FOUND, "citation 값이 문자열이 아닙니다")
    close_quote = _scan_string(trace_text, open_quote + 1)
    if close_quote < 0:
        raise DataError(ErrorCode.SPAN_NOT_FOUND, "citation 값이 끝나지 않았습니다")
    return open_quote + 1, close_quote


def map_span_to_tokens(record: AuditRecord, char_span: Tuple[int, int]) -> range:
    """문자 구간을 덮는 최소 연속 토큰 구간. 경계에 걸친 토큰도 포함한다.

    빈 구간이면 그 위치의 빈 range를 돌려준다(길이 0이 곧 표시).
    """
    start, end = char_span
    tokens = record.tokens
    if start == end:
        for i, tok in enumerate(tokens):
            if tok.char_end > start:
                return range(i, i)
        return range(len(tokens), len(tokens))
    if not tokens or tokens[-1].char_end < end:
        raise DataError(ErrorCode.UNCOVERED_SPAN, f"토큰이 문자 {end}까지 덮지 않습니다", record_id=record.id)
    first = next(i for i, tok in enumerate(tokens) if tok.char_end > start)
    last = max(i for i, tok in enumerate(tokens) if tok.char_start < end)
    return range(first, last + 1)


def _value_token(record: AuditRecord, fv: FieldValue, name: str) -> int:
    for i, tok in enumerate(record.tokens):
        if tok.char_end <= fv.value_start:
            continue
        if tok.char_start >= fv.value_end:
            break
        lo = max(tok.char_start, fv.value_start)
        hi = min(tok.char_end, fv.value_end)
        if record.trace_text[lo:hi].strip():
            return i
    raise DataError(ErrorCode.FIELD_TOKEN_NOT_FOUND, f"{name} 값 토큰을 찾지 못했습니다", record_id=record.id)


def locate_field_token(record: AuditRecord, field_name: str, parsed: Optional[ParsedTrace] = None) -> int:
    """ω/ι/ξ 값의 첫 토큰 인덱스. 이 토큰의 top_candidates가 분포의 출처다."""
    if field_name not in ("precedent_weight", "inverse_check", "defensibility_level"):
        raise ValueError(f"단일 토큰 필드가 아닙니다: {field_name}")
    parsed = parsed if parsed is not None else parse_trace(record.trace_text)
    fv = parsed.fields.get(field_name)
    if fv is None:
        raise DataError(ErrorCode.FIELD_TOKEN_NOT_FOUND, f"{field_name} 필드가 없습니다", record_id=record.id)
    return _value_token(record, fv, field_name)


def build_audit_trace(record: AuditRecord) -> AuditTrace:
    """파싱 + 토큰 위치 탐색을 한 번에. 위치를 못 찾은 필드는 None으로 두고 diagnostics에 남긴다."""
    parsed = parse_trace(record.trace_text)
    diagnostics = list(parsed.diagnostics)
    for code, name in parsed.issues:
        diagnostics.append(f"{code.value}({name})")

    citation_span = None
    citation_tokens = None
    try:
        citation_span = find_citation_span(record.trace_text)
        logic = parsed.fields.get("logic_chain")
        if logic is not None and citation_span[0] < logic.value_start:
            diagnostics.append("citation span precedes logic_chain span")
        scanned = parsed.fields.get("policy_citation")
        if scanned is not None and (scanned.value_start, scanned.value_end) != citation_span:
            diagnostics.append("citation span differs from scanned policy_citation value")
        citation_tokens = map_span_to_tokens(record, citation_span)
    except DataError as exc:
        diagnostics.append(exc.code.value)

    positions: Dict[str, Optional[int]] = {}
    for name in ("precedent_weight", "inverse_check", "defensibility_level"):
        try:
            positions[name] = locate_field_token(record, name, parsed)
        except DataError as exc:
            positions[name] = None
            diagnostics.append(f"{exc.code.value}({name})")

    return AuditTrace(
        logic_chain=parsed.logic_chain,
        policy_citation=parsed.policy_citation,
        precedent_weight=parsed.precedent_weight,
        inverse_check=parsed.inverse_check,
        defensibility_level=parsed.defensibility_level,
        citation_span=citation_span,
        citation_tokens=citation_tokens,
        weight_token=positions["precedent_weight"],
        inverse_token=positions["inverse_check"],
        level_token=positions["defensibility_level"],
        diagnostics=tuple(diagnostics),
    )


def render_trace(
    logic_chain: str,
    policy_citation: str,
    precedent_weight: str,
    inverse_check: str,
    defensibility_level: str,
) -> str:
    """필드 순서대로 평면 트레이스를 만든다."""
    values = [logic_chain, policy_citation, precedent_weight, inverse_check, defensibility_level]
    parts = [f"{json.dumps(k)}: {json.dumps(v, ensure_ascii=False)}" for k, v in zip(TRACE_FIELDS, values)]
    return "{" + ", ".join(parts) + "}"
