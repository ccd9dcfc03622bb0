# -*- coding: utf-8 -*-
"""PDS 성분 추출과 컬럼형 중간 산출물 생성.

저장된 logprob만으로 λ_ξ, H[κ], H[w], σ(ρ)를 계산한다.
로그확률은 자연로그, 엔트로피는 bit 단위.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit, logsumexp
from scipy.stats import entropy

from data.records import (
    AuditRecord,
    AuditTrace,
    DefensibilityLevel,
    InverseCheck,
    PrecedentWeight,
    TokenCandidate,
    is_valid_audit,
    validate_record,
)
from data.trace_parser import build_audit_trace
from util.errors import AuditEngineError, DataError, ErrorCode

logger = logging.getLogger(__name__)

COMPONENTS = ("lambda_xi", "h_kappa", "h_w", "sigma_rho")

LEVEL_LABELS = (("1", DefensibilityLevel.L1), ("2", DefensibilityLevel.L2), ("3", DefensibilityLevel.L3))
WEIGHT_LABELS = tuple((w.value, w) for w in PrecedentWeight)
POLARITY_LABELS = tuple((c.value, c) for c in InverseCheck)


class ExtractionStatus(str, Enum):
    OK = "OK"
    NO_LEVEL_CANDIDATE = "NO_LEVEL_CANDIDATE"
    EMPTY_SPAN = "EMPTY_SPAN"
    MISSING_CANDIDATES = "MISSING_CANDIDATES"
    NO_WEIGHT_CANDIDATE = "NO_WEIGHT_CANDIDATE"
    MISSING_POLARITY = "MISSING_POLARITY"
    SPAN_NOT_FOUND = "SPAN_NOT_FOUND"
    UNCOVERED_SPAN = "UNCOVERED_SPAN"
    FIELD_TOKEN_NOT_FOUND = "FIELD_TOKEN_NOT_FOUND"


@dataclass(frozen=True)
class PdsVector:
    """PDS 원시값. 방향(부호) 적용은 스칼라 축약 시점에 한다."""
    lambda_xi: Optional[float]
    h_kappa: Optional[float]
    h_w: Optional[float]
    sigma_rho: Optional[float]
    map_level: Optional[DefensibilityLevel]
    extraction_flags: Mapping[str, ExtractionStatus] = field(default_factory=dict)

    def is_ok(self, component: str) -> bool:
        return self.extraction_flags.get(component, ExtractionStatus.OK) is ExtractionStatus.OK


def _matches(candidate: str, label: str) -> bool:
    text = candidate.lstrip().lower()
    return bool(text) and label.lower().startswith(text)


def aggregate_matched(candidates: Sequence[TokenCandidate], labels) -> Dict[object, float]:
    """라벨별로 매칭된 후보 logprob을 logsumexp로 합친다. 매칭 안 된 후보는 버린다."""
    buckets: Dict[object, List[float]] = {}
    for cand in candidates:
        for text, key in labels:
            if _matches(cand.token, text):
                buckets.setdefault(key, []).append(cand.logprob)
                break
    return {key: float(logsumexp(lps)) for key, lps in buckets.items()}


def _entropy_bits(logprobs: Sequence[float]) -> float:
    lps = np.asarray(logprobs, dtype=float)
    # scipy entropy는 합이 1이 되도록 다시 정규화한다
    return float(entropy(np.exp(lps - lps.max()), base=2))


def extract_lambda_xi(record: AuditRecord, trace: AuditTrace) -> Tuple[float, DefensibilityLevel]:
    if trace.level_token is None:
        raise DataError(ErrorCode.FIELD_TOKEN_NOT_FOUND, "ξ 토큰 위치가 없습니다", record_id=record.id)
    matched = aggregate_matched(record.tokens[trace.level_token].top_candidates, LEVEL_LABELS)
    if not matched:
        raise DataError(ErrorCode.NO_LEVEL_CANDIDATE, "후보에 1/2/3이 없습니다", record_id=record.id)
    best_level = None
    best_lp = -math.inf
    # 동률이면 낮은 레벨
    for _, level in LEVEL_LABELS:
        if level in matched and matched[level] > best_lp:
            best_level, best_lp = level, matched[level]
    total = float(logsumexp(list(matched.values())))
    return min(best_lp - total, 0.0), best_level


def compute_h_kappa(record: AuditRecord, token_range: range) -> float:
    """citation 구간 위치별 조건부 엔트로피(bit)의 산술 평균."""
    if len(token_range) == 0:
        raise DataError(ErrorCode.EMPTY_SPAN, "citation 구간이 비어 있습니다", record_id=record.id)
    per_position = []
    for i in token_range:
        cands = record.tokens[i].top_candidates
        if not cands:
            raise DataError(ErrorCode.MISSING_CANDIDATES, f"{i}번 토큰에 후보가 없습니다", record_id=record.id, detail=i)
        per_position.append(_entropy_bits([c.logprob for c in cands]))
    return float(np.mean(per_position))


def compute_h_w(record: AuditRecord, token_index: int) -> float:
    matched = aggregate_matched(record.tokens[token_index].top_candidates, WEIGHT_LABELS)
    if not matched:
        raise DataError(ErrorCode.NO_WEIGHT_CANDIDATE, "후보에 High/Medium/Low가 없습니다", record_id=record.id)
    return _entropy_bits(list(matched.values()))


def compute_sigma_rho(record: AuditRecord, token_index: int) -> float:
    """ρ = logprob(Yes) − logprob(No)의 로지스틱. 차이는 재정규화에 불변이다."""
    matched = aggregate_matched(record.tokens[token_index].top_candidates, POLARITY_LABELS)
    for polarity in InverseCheck:
        if polarity not in matched:
            raise DataError(
                ErrorCode.MISSING_POLARITY, f"{polarity.value} 후보가 없습니다", record_id=record.id, detail=polarity
            )
    rho = matched[InverseCheck.YES] - matched[InverseCheck.NO]
    return float(expit(rho))


def _status(exc: AuditEngineError) -> ExtractionStatus:
    try:
        return ExtractionStatus(exc.code.value)
    except ValueError:
        return ExtractionStatus.FIELD_TOKEN_NOT_FOUND


def assemble_pds(record: AuditRecord, trace: Optional[AuditTrace] = None) -> PdsVector:
    """네 추출기를 돌려 PDS 벡터를 만든다. 실패한 성분은 플래그만 남기고 전체를 실패시키지 않는다."""
    trace = trace if trace is not None else build_audit_trace(record)
    flags: Dict[str, ExtractionStatus] = {}
    lambda_xi = h_kappa = h_w = sigma_rho = None
    map_level = None

    try:
        lambda_xi, map_level = extract_lambda_xi(record, trace)
        flags["lambda_xi"] = ExtractionStatus.OK
    except AuditEngineError as exc:
        flags["lambda_xi"] = _status(exc)

    if trace.citation_tokens is None:
        missing = ExtractionStatus.SPAN_NOT_FOUND
        if any(d.startswith(ErrorCode.UNCOVERED_SPAN.value) for d in trace.diagnostics):
            missing = ExtractionStatus.UNCOVERED_SPAN
        flags["h_kappa"] = missing
    else:
        try:
            h_kappa = compute_h_kappa(record, trace.citation_tokens)
            flags["h_kappa"] = ExtractionStatus.OK
        except AuditEngineError as exc:
            flags["h_kappa"] = _status(exc)

    if trace.weight_token is None:
        flags["h_w"] = ExtractionStatus.FIELD_TOKEN_NOT_FOUND
    else:
        try:
            h_w = compute_h_w(record, trace.weight_token)
            flags["h_w"] = ExtractionStatus.OK
        except AuditEngineError as exc:
            flags["h_w"] = _status(exc)

    if trace.inverse_token is None:
        flags["sigma_rho"] = ExtractionStatus.FIELD_TOKEN_NOT_FOUND
    else:
        try:
            sigma_rho = compute_sigma_rho(record, trace.inverse_token)
            flags["sigma_rho"] = ExtractionStatus.OK
        except AuditEngineError as exc:
            flags["sigma_rho"] = _status(exc)

    return PdsVector(lambda_xi, h_kappa, h_w, sigma_rho, map_level, flags)


# ==========================
# 컬럼형 중간 산출물
# ==========================
FRAME_COLUMNS = [
    "id", "case_id", "community_id", "temperature",
    "proposed_action", "human_action",
    "level", "inverse_check", "precedent_weight", "map_level",
    "lambda_xi", "h_kappa", "h_w", "sigma_rho",
    "flag_lambda_xi", "flag_h_kappa", "flag_h_w", "flag_sigma_rho",
    "citation",
]


@dataclass
class ExtractionResult:
    frame: pd.DataFrame
    n_lines: int = 0
    attrition: Counter = field(default_factory=Counter)
    failures: List[Tuple[str, str]] = field(default_factory=list)
    citation_detected: int = 0

    @property
    def n_valid(self) -> int:
        return len(self.frame)

    @property
    def detection_rate(self) -> float:
        return self.citation_detected / self.n_valid if self.n_valid else float("nan")


class PdsExtractionProcessor:
    """레코드 묶음을 PDS 컬럼 표로 바꾸는 처리기. 레코드 단위 오류는 건너뛰고 센다."""

    def __init__(self):
        self.attrition: Counter = Counter()
        self.failures: List[Tuple[str, str]] = []

    def _skip(self, record_id: str, reason: str):
        self.attrition[reason] += 1
        self.failures.append((record_id, reason))

    def row_for(self, record: AuditRecord) -> Optional[Dict[str, object]]:
        violations = validate_record(record)
        if violations:
            self._skip(record.id, "INVALID_RECORD")
            logger.debug("레코드 %s 검증 실패: %s", record.id, "; ".join(map(str, violations)))
            return None
        try:
            trace = build_audit_trace(record)
        except AuditEngineError as exc:
            self._skip(record.id, exc.code.value)
            return None
        if not is_valid_audit(record, trace):
            self._skip(record.id, "INCOMPLETE_TRACE")
            return None
        pds = assemble_pds(record, trace)
        for comp in COMPONENTS:
            if not pds.is_ok(comp):
                self.attrition[f"{comp}:{pds.extraction_flags[comp].value}"] += 1
        return {
            "id": record.id,
            "case_id": record.group_key,
            "community_id": record.community_id,
            "temperature": record.temperature,
            "proposed_action": record.proposed_action.value,
            "human_action": record.human_action.value if record.human_action else None,
            "level": trace.defensibility_level.value,
            "inverse_check": trace.inverse_check.value,
            "precedent_weight": trace.precedent_weight.value,
            "map_level": pds.map_level.value if pds.map_level else None,
            "lambda_xi": pds.lambda_xi,
            "h_kappa": pds.h_kappa,
            "h_w": pds.h_w,
            "sigma_rho": pds.sigma_rho,
            "flag_lambda_xi": pds.extraction_flags["lambda_xi"].value,
            "flag_h_kappa": pds.extraction_flags["h_kappa"].value,
            "flag_h_w": pds.extraction_flags["h_w"].value,
            "flag_sigma_rho": pds.extraction_flags["sigma_rho"].value,
            "citation": trace.policy_citation,
            "_citation_found": trace.citation_span is not None,
        }

    def process_records(self, records: Iterable[AuditRecord], n_lines: Optional[int] = None) -> ExtractionResult:
        rows = []
        seen = 0
        for record in records:
            seen += 1
            row = self.row_for(record)
            if row is not None:
                rows.append(row)
        frame = pd.DataFrame(rows, columns=FRAME_COLUMNS + ["_citation_found"])
        detected = int(frame["_citation_found"].sum()) if not frame.empty else 0
        frame = frame.drop(columns="_citation_found")
        result = ExtractionResult(
            frame=frame,
            n_lines=n_lines if n_lines is not None else seen,
            attrition=Counter(self.attrition),
            failures=list(self.failures),
            citation_detected=detected,
        )
        logger.info(
            "PDS 추출 완료: 유효 %d / 입력 %d, citation 탐지율 %.4f",
            result.n_valid, result.n_lines, result.detection_rate if result.n_valid else 0.0,
        )
        return result


def extract_frame(records: Iterable[AuditRecord]) -> pd.DataFrame:
    return PdsExtractionProcessor().process_records(records).frame


def vector_from_row(row: Mapping[str, object]) -> PdsVector:
    """컬럼 표의 한 행을 PdsVector로 되돌린다."""
    def value(name):
        v = row.get(name)
        return None if v is None or (isinstance(v, float) and math.isnan(v)) else float(v)

    flags = {c: ExtractionStatus(row.get(f"flag_{c}", "OK")) for c in COMPONENTS}
    level = row.get("map_level")
    return PdsVector(
        lambda_xi=value("lambda_xi"),
        h_kappa=value("h_kappa"),
        h_w=value("h_w"),
        sigma_rho=value("sigma_rho"),
        map_level=DefensibilityLevel(level) if isinstance(level, str) else None,
        extraction_flags=flags,
    )
