# -*- coding: utf-8 -*-
"""2단계 방어: 인용 규칙의 어휘적 근거 확인 + 캘리브레이션된 S 임계값, 공격 유형 분류."""
from __future__ import annotations

import logging
import re
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import config
from data.records import RuleSet
from util.errors import DataError, ErrorCode

logger = logging.getLogger(__name__)

_NON_ALNUM = re.compile(r"[^0-9a-z]+")


class Verdict(str, Enum):
    CLEAN = "CLEAN"
    FLAG_PDS = "FLAG_PDS"
    FLAG_GROUNDING = "FLAG_GROUNDING"
    FLAG_BOTH = "FLAG_BOTH"

    @property
    def flagged(self) -> bool:
        return self is not Verdict.CLEAN


class Archetype(str, Enum):
    LOW_ENTROPY_FABRICATION = "LOW_ENTROPY_FABRICATION"
    POLICY_PENUMBRA = "POLICY_PENUMBRA"
    UNCLASSIFIED = "UNCLASSIFIED"


def normalize_tokens(text: str) -> List[str]:
    """소문자화 후 영숫자가 아닌 구간에서 분리."""
    return [tok for tok in _NON_ALNUM.split((text or "").lower()) if tok]


@lru_cache(maxsize=4096)
def _block_tokens(body: str) -> frozenset:
    return frozenset(normalize_tokens(body))


def overlap_score(citation: str, rule_set: RuleSet) -> Tuple[Optional[str], float]:
    """인용 고유 토큰 중 블록에 들어 있는 비율의 최댓값과 그 블록 id. 동점은 먼저 나온 블록."""
    tokens = set(normalize_tokens(citation))
    if not tokens:
        raise DataError(ErrorCode.EMPTY_CITATION, "인용에 토큰이 없습니다")
    best_id, best = None, -1.0
    for block in rule_set.blocks:
        score = len(tokens & _block_tokens(block.body)) / len(tokens)
        if score > best:
            best_id, best = block.rule_id, score
    if best_id is None:
        return None, 0.0
    return best_id, best


def two_layer_verdict(
    s: float,
    overlap: float,
    s_min: float = config.VERIFIER_S_MIN,
    overlap_min: float = config.VERIFIER_OVERLAP_MIN,
) -> Verdict:
    low_s = s < s_min
    ungrounded = overlap < overlap_min
    if low_s and ungrounded:
        return Verdict.FLAG_BOTH
    if low_s:
        return Verdict.FLAG_PDS
    if ungrounded:
        return Verdict.FLAG_GROUNDING
    return Verdict.CLEAN


def classify_archetype(
    h_kappa: float,
    s: float,
    overlap: float,
    s_min: float = config.VERIFIER_S_MIN,
    overlap_min: float = config.VERIFIER_OVERLAP_MIN,
    h_kappa_band: Tuple[float, float] = config.DEFAULT_H_KAPPA_BAND,
) -> Archetype:
    if overlap < overlap_min and s < s_min:
        return Archetype.LOW_ENTROPY_FABRICATION
    low, high = h_kappa_band
    if overlap >= overlap_min and low <= h_kappa <= high:
        return Archetype.POLICY_PENUMBRA
    return Archetype.UNCLASSIFIED


def clean_band(h_kappa_values: Sequence[float], percentile: float = config.CLEAN_BAND_PERCENTILE) -> Tuple[float, float]:
    """정상 코호트 H[κ]의 [0, p95] 구간."""
    values = np.asarray([v for v in h_kappa_values if v is not None and not np.isnan(v)], dtype=float)
    if len(values) == 0:
        logger.warning("정상 코호트가 비어 기본 H[κ] 구간을 사용합니다")
        return config.DEFAULT_H_KAPPA_BAND
    return 0.0, float(np.percentile(values, percentile))


def verify_frame(
    frame: pd.DataFrame,
    rule_sets: Mapping[str, RuleSet],
    scores: pd.Series,
    s_min: float = config.VERIFIER_S_MIN,
    overlap_min: float = config.VERIFIER_OVERLAP_MIN,
    h_kappa_band: Tuple[float, float] = config.DEFAULT_H_KAPPA_BAND,
) -> pd.DataFrame:
    """
    레코드별 판정표.
    • 인용이 비었거나 규칙 집합이 없으면 overlap 0
    • S가 없는(추출 실패) 레코드는 건너뛰고 개수를 로그로 남긴다
    """
    rows = []
    skipped = 0
    for idx, row in frame.iterrows():
        s = scores.get(idx)
        if s is None or pd.isna(s):
            skipped += 1
            continue
        rule_set = rule_sets.get(str(row["community_id"]))
        citation = row.get("citation")
        matched, overlap = None, 0.0
        if rule_set is None:
            logger.debug("record %s: 커뮤니티 %s 규칙 없음", row["id"], row["community_id"])
        elif isinstance(citation, str):
            try:
                matched, overlap = overlap_score(citation, rule_set)
            except DataError:
                pass
        h_kappa = row.get("h_kappa")
        h_kappa = float(h_kappa) if h_kappa is not None and not pd.isna(h_kappa) else float("nan")
        rows.append({
            "id": row["id"],
            "community_id": row["community_id"],
            "S (prob)": float(s),
            "overlap (prob)": overlap,
            "h_kappa (bits)": h_kappa,
            "matched_rule": matched,
            "verdict": two_layer_verdict(float(s), overlap, s_min, overlap_min).value,
            "archetype": classify_archetype(h_kappa, float(s), overlap, s_min, overlap_min, h_kappa_band).value,
        })
    if skipped:
        logger.warning("검증: S가 없는 레코드 %d개 건너뜀", skipped)
    return pd.DataFrame(rows)


def adversarial_summary(verdicts: pd.DataFrame, truth: pd.DataFrame) -> pd.DataFrame:
    """주입 라벨(clean / action-flip / hallucinated)별 탐지율과 판정 분포."""
    merged = verdicts.merge(truth[["record_id", "adversarial"]], left_on="id", right_on="record_id", how="inner")
    rows = []
    for label, group in merged.groupby("adversarial", sort=True):
        flagged = group["verdict"] != Verdict.CLEAN.value
        row: Dict[str, object] = {
            "label": label,
            "N": int(len(group)),
            "Flag rate (%)": 100.0 * float(flagged.mean()),
            "mean S (prob)": float(group["S (prob)"].mean()),
            "mean overlap (prob)": float(group["overlap (prob)"].mean()),
            "mean h_kappa (bits)": float(group["h_kappa (bits)"].mean()),
        }
        for verdict in Verdict:
            row[verdict.value] = int((group["verdict"] == verdict.value).sum())
        for archetype in Archetype:
            row[archetype.value] = int((group["archetype"] == archetype.value).sum())
        rows.append(row)
    return pd.DataFrame(rows)
