# -*- coding: utf-8 -*-
"""감사 레코드 도메인 타입, 구조 검증, JSONL 직렬화."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import config


class ProposedAction(str, Enum):
    REMOVE = "REMOVE"
    APPROVE = "APPROVE"


class DefensibilityLevel(str, Enum):
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"

    @property
    def index(self) -> int:
        return int(self.value[1])

    @property
    def is_defensible(self) -> bool:
        return self is not DefensibilityLevel.L3

    @classmethod
    def from_digit(cls, text: str) -> "DefensibilityLevel":
        return {"1": cls.L1, "2": cls.L2, "3": cls.L3}[text]


class PrecedentWeight(str, Enum):
    HIGH = "High"
    MEDIUM = "Medium"
    LOW = "Low"


class InverseCheck(str, Enum):
    YES = "Yes"
    NO = "No"


# 생성 순서: logic_chain -> policy_citation -> precedent_weight -> inverse_check -> defensibility_level
TRACE_FIELDS = (
    "logic_chain",
    "policy_citation",
    "precedent_weight",
    "inverse_check",
    "defensibility_level",
)


@dataclass(frozen=True)
class RuleBlock:
    rule_id: str
    body: str


@dataclass(frozen=True)
class RuleSet:
    community_id: str
    platform_rules: Tuple[RuleBlock, ...] = ()
    community_rules: Tuple[RuleBlock, ...] = ()
    precedents: Tuple[RuleBlock, ...] = ()

    @property
    def blocks(self) -> Tuple[RuleBlock, ...]:
        return self.platform_rules + self.community_rules + self.precedents

    def violations(self) -> List[str]:
        found = []
        if not self.community_id:
            found.append("community_id: must be non-empty")
        for block in self.blocks:
            if not block.rule_id or not block.body:
                found.append(f"rule block '{block.rule_id}': identifier and body must be non-empty")
        return found


@dataclass(frozen=True)
class TokenCandidate:
    token: str
    logprob: float


@dataclass(frozen=True)
class TokenEvent:
    text: str
    logprob: float
    top_candidates: Tuple[TokenCandidate, ...]
    char_start: int
    char_end: int


@dataclass(frozen=True)
class AuditRecord:
    id: str
    community_id: str
    content: str
    proposed_action: ProposedAction
    human_action: Optional[ProposedAction]
    trace_text: str
    tokens: Tuple[TokenEvent, ...]
    temperature: float
    case_id: Optional[str] = None

    @property
    def group_key(self) -> str:
        return self.case_id or self.id


@dataclass(frozen=True)
class AuditTrace:
    """파싱된 트레이스 필드와 각 필드의 토큰 위치."""
    logic_chain: Optional[str]
    policy_citation: Optional[str]
    precedent_weight: Optional[PrecedentWeight]
    inverse_check: Optional[InverseCheck]
    defensibility_level: Optional[DefensibilityLevel]
    citation_span: Optional[Tuple[int, int]] = None
    citation_tokens: Optional[range] = None
    weight_token: Optional[int] = None
    inverse_token: Optional[int] = None
    level_token: Optional[int] = None
    diagnostics: Tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class Violation:
    field: str
    invariant: str

    def __str__(self) -> str:
        return f"{self.field}: {self.invariant}"


def validate_record(record: AuditRecord, trace: Optional[AuditTrace] = None) -> List[Violation]:
    """타입 불변식을 검사해 위반 목록을 돌려준다. 빈 목록이면 정상.

    trace가 주어지면 필드 토큰 위치의 생성 순서와 범위도 함께 검사한다.
    """
    found: List[Violation] = []
    if not record.id:
        found.append(Violation("id", "must be non-empty"))
    if not record.community_id:
        found.append(Violation("community_id", "must be non-empty"))
    if not isinstance(record.proposed_action, ProposedAction):
        found.append(Violation("proposed_action", "must be REMOVE or APPROVE"))
    if record.human_action is not None and not isinstance(record.human_action, ProposedAction):
        found.append(Violation("human_action", "must be REMOVE, APPROVE or null"))
    if not (0.0 <= record.temperature <= 2.0):
        found.append(Violation("temperature", "must lie in [0, 2]"))

    expected_start = 0
    text_len = len(record.trace_text)
    for i, tok in enumerate(record.tokens):
        name = f"tokens[{i}]"
        if tok.logprob > 0:
            found.append(Violation(f"{name}.logprob", "logprob <= 0"))
        if len(tok.top_candidates) > config.MAX_TOP_CANDIDATES:
            found.append(Violation(f"{name}.top_candidates", f"at most {config.MAX_TOP_CANDIDATES} entries"))
        if any(c.logprob > 0 for c in tok.top_candidates):
            found.append(Violation(f"{name}.top_candidates", "candidate logprob <= 0"))
        lps = [c.logprob for c in tok.top_candidates]
        if any(a < b for a, b in zip(lps, lps[1:])):
            found.append(Violation(f"{name}.top_candidates", "sorted descending by logprob"))
        if tok.char_start >= tok.char_end:
            found.append(Violation(f"{name}.char_start", "char_start < char_end"))
        if tok.char_start != expected_start:
            found.append(Violation(f"{name}.char_start", "spans contiguous and monotonically increasing"))
        if tok.char_end > text_len:
            found.append(Violation(f"{name}.char_end", "span within trace_text"))
        elif record.trace_text[tok.char_start:tok.char_end] != tok.text:
            found.append(Violation(f"{name}.text", "span text equals trace_text slice"))
        expected_start = tok.char_end

    if trace is not None:
        found.extend(_trace_position_violations(record, trace))
    return found


def _trace_position_violations(record: AuditRecord, trace: AuditTrace) -> List[Violation]:
    found = []
    n = len(record.tokens)
    ordered = [
        ("policy_citation", trace.citation_tokens.start if trace.citation_tokens is not None else None),
        ("precedent_weight", trace.weight_token),
        ("inverse_check", trace.inverse_token),
        ("defensibility_level", trace.level_token),
    ]
    for name, pos in ordered:
        if pos is not None and not (0 <= pos < n):
            found.append(Violation(name, "token position within token sequence"))
    if trace.citation_tokens is not None and trace.citation_tokens.stop > n:
        found.append(Violation("policy_citation", "token span within token sequence"))

    previous = None
    for name, pos in ordered:
        if pos is None:
            continue
        if previous is not None and pos <= previous[1]:
            found.append(Violation(name, f"generation order: must follow {previous[0]}"))
        previous = (name, pos)
    return found


def is_valid_audit(record: AuditRecord, trace: Optional[AuditTrace]) -> bool:
    """다섯 필드가 모두 파싱되고 타입이 맞을 때만 유효 감사로 센다."""
    if trace is None:
        return False
    return (
        isinstance(trace.logic_chain, str)
        and isinstance(trace.policy_citation, str)
        and isinstance(trace.precedent_weight, PrecedentWeight)
        and isinstance(trace.inverse_check, InverseCheck)
        and isinstance(trace.defensibility_level, DefensibilityLevel)
    )


# ==========================
# JSONL 직렬화
# ==========================
def record_to_dict(record: AuditRecord) -> Dict[str, Any]:
    out: Dict[str, Any] = {
        "id": record.id,
        "community_id": record.community_id,
        "content": record.content,
        "proposed_action": record.proposed_action.value,
        "human_action": record.human_action.value if record.human_action else None,
        "trace_text": record.trace_text,
        "tokens": [
            {
                "text": t.text,
                "logprob": t.logprob,
                "top_candidates": [{"token": c.token, "logprob": c.logprob} for c in t.top_candidates],
                "char_start": t.char_start,
                "char_end": t.char_end,
            }
            for t in record.tokens
        ],
        "temperature": record.temperature,
    }
    if record.case_id is not None:
        out["case_id"] = record.case_id
    return out


def record_from_dict(obj: Dict[str, Any]) -> AuditRecord:
    """JSON 객체를 AuditRecord로. 필수 필드 누락이나 잘못된 enum 값은 KeyError/ValueError."""
    human = obj.get("human_action")
    tokens = tuple(
        TokenEvent(
            text=t["text"],
            logprob=float(t["logprob"]),
            top_candidates=tuple(
                TokenCandidate(c["token"], float(c["logprob"])) for c in (t.get("top_candidates") or [])
            ),
            char_start=int(t["char_start"]),
            char_end=int(t["char_end"]),
        )
        for t in obj["tokens"]
    )
    return AuditRecord(
        id=str(obj["id"]),
        community_id=str(obj["community_id"]),
        content=obj.get("content", ""),
        proposed_action=ProposedAction(obj["proposed_action"]),
        human_action=ProposedAction(human) if human is not None else None,
        trace_text=obj["trace_text"],
        tokens=tokens,
        temperature=float(obj["temperature"]),
        case_id=obj.get("case_id"),
    )


def dumps_record(record: AuditRecord) -> str:
    return json.dumps(record_to_dict(record), ensure_ascii=False, sort_keys=True)


def loads_record(line: str) -> AuditRecord:
    return record_from_dict(json.loads(line))


def rule_set_to_dict(rule_set: RuleSet) -> Dict[str, Any]:
    def blocks(items: Sequence[RuleBlock]):
        return [{"rule_id": b.rule_id, "body": b.body} for b in items]

    return {
        "community_id": rule_set.community_id,
        "platform_rules": blocks(rule_set.platform_rules),
        "community_rules": blocks(rule_set.community_rules),
        "precedents": blocks(rule_set.precedents),
    }


def rule_set_from_dict(obj: Dict[str, Any]) -> RuleSet:
    def blocks(key: str) -> Tuple[RuleBlock, ...]:
        return tuple(RuleBlock(str(b["rule_id"]), str(b["body"])) for b in obj.get(key, []))

    return RuleSet(
        community_id=str(obj["community_id"]),
        platform_rules=blocks("platform_rules"),
        community_rules=blocks("community_rules"),
        precedents=blocks("precedents"),
    )
