# -*- coding: utf-8 -*-
"""코호트 지표(DI, AI, F1, 방어가능 FN 비율 등)와 거버넌스 상태 분류, 보고 표."""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

import config
from data.records import DefensibilityLevel, InverseCheck, ProposedAction
from util.errors import AuditEngineError, DataError, ErrorCode


class GovernanceState(str, Enum):
    EARNED_AUTONOMY = "EARNED_AUTONOMY"
    POLICY_GAPS = "POLICY_GAPS"
    NORMATIVE_COMPLEXITY = "NORMATIVE_COMPLEXITY"


@dataclass(frozen=True)
class AuditedDecision:
    level: DefensibilityLevel
    proposed_action: ProposedAction
    human_action: Optional[ProposedAction] = None
    inverse_check: Optional[InverseCheck] = None


@dataclass(frozen=True)
class CohortReport:
    cohort_id: str
    n: int
    di: float
    ai: float
    level_counts: Tuple[int, int, int]
    f1: Optional[float] = None
    gap: Optional[float] = None
    defensible_fn_rate: Optional[float] = None
    accurate_but_indefensible_rate: Optional[float] = None
    governance_state: Optional[GovernanceState] = None

    @property
    def indefensible(self) -> int:
        return self.level_counts[2]


@dataclass(frozen=True)
class CohortDelta:
    cohort_a: str
    cohort_b: str
    delta_di_pp: float
    delta_ai_pp: float
    delta_levels: Tuple[int, int, int]


def _level(x) -> DefensibilityLevel:
    return x if isinstance(x, DefensibilityLevel) else DefensibilityLevel(str(x))


def _check(x) -> InverseCheck:
    if isinstance(x, InverseCheck):
        return x
    return InverseCheck(str(x).strip().capitalize())


def _action(x) -> ProposedAction:
    return x if isinstance(x, ProposedAction) else ProposedAction(str(x).upper())


def compute_di(levels: Sequence) -> float:
    if len(levels) == 0:
        raise DataError(ErrorCode.EMPTY_COHORT, "레벨 목록이 비었습니다")
    defensible = sum(1 for lv in levels if _level(lv).is_defensible)
    return defensible / len(levels)


def compute_ai(inverse_checks: Sequence) -> float:
    if len(inverse_checks) == 0:
        raise DataError(ErrorCode.EMPTY_COHORT, "inverse_check 목록이 비었습니다")
    return sum(1 for c in inverse_checks if _check(c) is InverseCheck.YES) / len(inverse_checks)


def compute_f1(pairs: Sequence[Tuple], positive: ProposedAction = ProposedAction.REMOVE) -> float:
    """(모델 ŷ, 사람 y) 쌍의 F1. 양성 클래스 기본값은 REMOVE."""
    if len(pairs) == 0:
        raise DataError(ErrorCode.EMPTY_COHORT, "판정 쌍이 비었습니다")
    tp = fp = fn = 0
    for model, human in pairs:
        m, h = _action(model) is positive, _action(human) is positive
        tp += m and h
        fp += m and not h
        fn += h and not m
    if tp == 0:
        return 0.0
    # 2PR/(P+R)와 같은 값을 나눗셈 한 번으로
    return 2 * tp / (2 * tp + fp + fn)


def _with_human(decisions: Iterable[AuditedDecision]) -> List[AuditedDecision]:
    return [d for d in decisions if d.human_action is not None]


def defensible_fn_rate(decisions: Sequence[AuditedDecision]) -> float:
    """모델 APPROVE / 사람 REMOVE인 FN 가운데 L1·L2 비율."""
    fns = [
        d for d in _with_human(decisions)
        if _action(d.proposed_action) is ProposedAction.APPROVE and _action(d.human_action) is ProposedAction.REMOVE
    ]
    if not fns:
        raise DataError(ErrorCode.NO_FALSE_NEGATIVES, "거짓 음성이 없습니다")
    return sum(1 for d in fns if _level(d.level).is_defensible) / len(fns)


def accurate_but_indefensible_rate(decisions: Sequence[AuditedDecision]) -> float:
    """모델과 사람이 일치한 경우 가운데 L3 비율."""
    agreements = [d for d in _with_human(decisions) if _action(d.proposed_action) is _action(d.human_action)]
    if not agreements:
        raise DataError(ErrorCode.NO_AGREEMENTS, "일치 사례가 없습니다")
    return sum(1 for d in agreements if _level(d.level) is DefensibilityLevel.L3) / len(agreements)


def disagreement_split(decisions: Sequence[AuditedDecision]) -> Dict[str, Optional[float]]:
    """불일치 사례의 L3(모델 오류) / L1·L2(정책상 방어가능) 분할. 전체 불일치와 FN만 따로."""
    rows = _with_human(decisions)
    disagreements = [d for d in rows if _action(d.proposed_action) is not _action(d.human_action)]
    fns = [d for d in disagreements if _action(d.human_action) is ProposedAction.REMOVE]

    def share(items):
        if not items:
            return None
        return sum(1 for d in items if _level(d.level).is_defensible) / len(items)

    all_def, fn_def = share(disagreements), share(fns)
    return {
        "n_disagreements": len(disagreements),
        "disagreements_defensible": all_def,
        "disagreements_indefensible": None if all_def is None else 1.0 - all_def,
        "n_false_negatives": len(fns),
        "fn_defensible": fn_def,
        "fn_indefensible": None if fn_def is None else 1.0 - fn_def,
    }


def classify_governance_state(
    report: CohortReport,
    di_threshold: float = config.GATE_DI_MIN,
    ai_threshold: float = config.GATE_AI_MAX,
    min_size: int = config.GATE_MIN_DECISIONS,
) -> GovernanceState:
    if report.n < min_size:
        raise DataError(ErrorCode.COHORT_TOO_SMALL, f"{report.cohort_id}: n={report.n} < {min_size}")
    if report.di < di_threshold:
        return GovernanceState.POLICY_GAPS
    if report.ai <= ai_threshold:
        return GovernanceState.EARNED_AUTONOMY
    return GovernanceState.NORMATIVE_COMPLEXITY


def compare_cohorts(a: CohortReport, b: CohortReport) -> CohortDelta:
    """b − a를 퍼센트포인트로."""
    return CohortDelta(
        cohort_a=a.cohort_id,
        cohort_b=b.cohort_id,
        delta_di_pp=(b.di - a.di) * 100.0,
        delta_ai_pp=(b.ai - a.ai) * 100.0,
        delta_levels=tuple(y - x for x, y in zip(a.level_counts, b.level_counts)),
    )


def _optional(fn, *args) -> Optional[float]:
    try:
        return fn(*args)
    except AuditEngineError:
        return None


def build_cohort_report(
    cohort_id: str,
    decisions: Sequence[AuditedDecision],
    di_threshold: float = config.GATE_DI_MIN,
    ai_threshold: float = config.GATE_AI_MAX,
    min_size: int = config.GATE_MIN_DECISIONS,
) -> CohortReport:
    if not decisions:
        raise DataError(ErrorCode.EMPTY_COHORT, f"{cohort_id}: 결정이 없습니다")
    levels = [_level(d.level) for d in decisions]
    counts = tuple(sum(1 for lv in levels if lv is target) for target in DefensibilityLevel)
    checks = [d.inverse_check for d in decisions if d.inverse_check is not None]
    di = compute_di(levels)
    ai = compute_ai(checks) if checks else 0.0
    humans = _with_human(decisions)
    f1 = compute_f1([(d.proposed_action, d.human_action) for d in humans]) if humans else None
    report = CohortReport(
        cohort_id=cohort_id,
        n=len(decisions),
        di=di,
        ai=ai,
        level_counts=counts,
        f1=f1,
        gap=None if f1 is None else di - f1,
        defensible_fn_rate=_optional(defensible_fn_rate, decisions),
        accurate_but_indefensible_rate=_optional(accurate_but_indefensible_rate, decisions),
    )
    state = _optional(classify_governance_state, report, di_threshold, ai_threshold, min_size)
    return replace(report, governance_state=state)


def decisions_from_frame(frame: pd.DataFrame) -> List[AuditedDecision]:
    out = []
    for row in frame.itertuples(index=False):
        human = getattr(row, "human_action", None)
        out.append(AuditedDecision(
            level=DefensibilityLevel(row.level),
            proposed_action=ProposedAction(row.proposed_action),
            human_action=ProposedAction(human) if isinstance(human, str) and human else None,
            inverse_check=InverseCheck(row.inverse_check),
        ))
    return out


def build_fleet_reports(frame: pd.DataFrame, by: str = "community_id", **thresholds) -> List[CohortReport]:
    return [
        build_cohort_report(str(key), decisions_from_frame(group), **thresholds)
        for key, group in frame.groupby(by, sort=True)
    ]


# ==========================
# 보고 표
# ==========================
def _pct(x: Optional[float]) -> float:
    return float("nan") if x is None else 100.0 * x


def agreement_gap_table(reports: Sequence[CohortReport]) -> pd.DataFrame:
    """지표 행 × 코호트 열 배치."""
    metrics = [
        ("N (decisions)", lambda r: r.n),
        ("F1 (agreement-based, %)", lambda r: _pct(r.f1)),
        ("DI (%)", lambda r: _pct(r.di)),
        ("Gap DI - F1 (pp)", lambda r: _pct(r.gap)),
        ("AI (%)", lambda r: _pct(r.ai)),
        ("Defensible FN rate (%)", lambda r: _pct(r.defensible_fn_rate)),
        ("Accurate but indefensible (%)", lambda r: _pct(r.accurate_but_indefensible_rate)),
    ]
    data = {"Metric": [name for name, _ in metrics]}
    for r in reports:
        data[r.cohort_id] = [fn(r) for _, fn in metrics]
    return pd.DataFrame(data)


def cohort_table(reports: Sequence[CohortReport]) -> pd.DataFrame:
    return pd.DataFrame([
        {
            "cohort": r.cohort_id,
            "n": r.n,
            "DI (prob)": r.di,
            "AI (prob)": r.ai,
            "L1": r.level_counts[0],
            "L2": r.level_counts[1],
            "L3": r.level_counts[2],
            "F1 (prob)": r.f1,
            "gap (prob)": r.gap,
            "defensible_fn_rate (prob)": r.defensible_fn_rate,
            "accurate_but_indefensible (prob)": r.accurate_but_indefensible_rate,
            "governance_state": r.governance_state.value if r.governance_state else "UNDER_MINIMUM",
        }
        for r in reports
    ])


def rule_tier_table(reports: Sequence[CohortReport]) -> pd.DataFrame:
    """규칙 구체성 단계별 비교. 델타는 첫 행 기준."""
    if not reports:
        return pd.DataFrame()
    base = reports[0]
    rows = []
    for r in reports:
        delta = compare_cohorts(base, r)
        rows.append({
            "Rule specificity": r.cohort_id,
            "N": r.n,
            "DI (%)": 100.0 * r.di,
            "AI (%)": 100.0 * r.ai,
            "Indefensible (count)": r.indefensible,
            "ΔDI (pp)": delta.delta_di_pp,
            "ΔAI (pp)": delta.delta_ai_pp,
        })
    return pd.DataFrame(rows)


def fleet_state_summary(reports: Sequence[CohortReport]) -> pd.DataFrame:
    rows = []
    for state in list(GovernanceState) + [None]:
        members = [r for r in reports if r.governance_state is state]
        if not members:
            continue
        rows.append({
            "governance_state": state.value if state else "UNDER_MINIMUM",
            "cohorts": len(members),
            "decisions": sum(r.n for r in members),
            "mean DI (%)": 100.0 * float(np.mean([r.di for r in members])),
            "mean AI (%)": 100.0 * float(np.mean([r.ai for r in members])),
        })
    return pd.DataFrame(rows)


def sigma_rho_table(frame: pd.DataFrame) -> pd.DataFrame:
    """온도별 σ(ρ)와 이진 inverse_check의 순위상관, Yes/No 평균 비."""
    from insight.stability import spearman

    rows = []
    for temperature, group in frame.groupby("temperature", sort=True):
        group = group[group["sigma_rho"].notna()]
        if group.empty:
            continue
        fired = (group["inverse_check"] == InverseCheck.YES.value).astype(float).to_numpy()
        sigma = group["sigma_rho"].to_numpy(dtype=float)
        try:
            rho = spearman(sigma, fired)
            p_value = float(spearmanr(sigma, fired).pvalue)
        except AuditEngineError:
            rho, p_value = float("nan"), float("nan")
        yes = sigma[fired == 1]
        no = sigma[fired == 0]
        mean_yes = float(yes.mean()) if len(yes) else float("nan")
        mean_no = float(no.mean()) if len(no) else float("nan")
        rows.append({
            "T": float(temperature),
            "N": int(len(group)),
            "AI (%)": 100.0 * float(fired.mean()),
            "Spearman rho": rho,
            "p": p_value,
            "sigma_rho Yes (prob)": mean_yes,
            "sigma_rho No (prob)": mean_no,
            "Ratio Yes/No": mean_yes / mean_no if mean_no and not np.isnan(mean_no) else float("nan"),
        })
    return pd.DataFrame(rows)


def level_profile_table(frame: pd.DataFrame, scores: Optional[pd.Series] = None) -> pd.DataFrame:
    """감사 레벨별 AI, 평균 σ(ρ), 평균 S, ω 분포."""
    rows = []
    for level in DefensibilityLevel:
        group = frame[frame["level"] == level.value]
        if group.empty:
            continue
        row = {
            "level": level.value,
            "N": int(len(group)),
            "AI (%)": 100.0 * float((group["inverse_check"] == InverseCheck.YES.value).mean()),
            "mean sigma_rho (prob)": float(group["sigma_rho"].mean()),
            "mean S (prob)": float(scores.loc[group.index].mean()) if scores is not None else float("nan"),
        }
        if "precedent_weight" in group.columns:
            for weight in ("High", "Medium", "Low"):
                row[f"omega {weight} (%)"] = 100.0 * float((group["precedent_weight"] == weight).mean())
        rows.append(row)
    return pd.DataFrame(rows)
