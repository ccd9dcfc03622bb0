# -*- coding: utf-8 -*-
"""거버넌스 게이트: 코호트별 자동 집행 허용 판정과 시나리오 민감도 표."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

import config
from insight.analyzer import CohortReport
from util.errors import DataError, ErrorCode
from util.export import read_json

logger = logging.getLogger(__name__)


class BindingConstraint(str, Enum):
    SIZE = "SIZE"
    DI = "DI"
    AI = "AI"
    NONE = "NONE"


@dataclass(frozen=True)
class GateConfig:
    di_min: float = config.GATE_DI_MIN
    ai_max: float = config.GATE_AI_MAX
    min_decisions: int = config.GATE_MIN_DECISIONS
    scenario_name: str = "Standard"

    def __post_init__(self):
        if not 0.0 < self.di_min <= 1.0:
            raise DataError(ErrorCode.INVALID_VALUE, f"di_min은 (0, 1] 범위여야 합니다: {self.di_min}")
        if not 0.0 <= self.ai_max < 1.0:
            raise DataError(ErrorCode.INVALID_VALUE, f"ai_max는 [0, 1) 범위여야 합니다: {self.ai_max}")
        if int(self.min_decisions) != self.min_decisions or self.min_decisions < 1:
            raise DataError(ErrorCode.INVALID_VALUE, f"min_decisions는 1 이상의 정수여야 합니다: {self.min_decisions}")


@dataclass(frozen=True)
class GateOutcome:
    passed: bool
    binding_constraint: BindingConstraint


def evaluate_gate(report: CohortReport, cfg: GateConfig) -> GateOutcome:
    """SIZE → DI → AI 순서로 처음 실패한 조건이 binding."""
    if report.n < cfg.min_decisions:
        return GateOutcome(False, BindingConstraint.SIZE)
    if report.di < cfg.di_min:
        return GateOutcome(False, BindingConstraint.DI)
    if report.ai > cfg.ai_max:
        return GateOutcome(False, BindingConstraint.AI)
    return GateOutcome(True, BindingConstraint.NONE)


def risk_reduction(
    baseline_indef_rate: float,
    gated_indef_rate: float,
    decision_coverage: float,
    formula: str = config.DEFAULT_RISK_FORMULA,
) -> float:
    """
    rate_ratio        : 1 − gated / baseline
    exposure_weighted : (baseline − gated · coverage) / baseline
    """
    if baseline_indef_rate == 0:
        raise DataError(ErrorCode.ZERO_BASELINE, "기준 부적격률이 0입니다")
    if formula == config.RISK_FORMULA_RATE_RATIO:
        return 1.0 - gated_indef_rate / baseline_indef_rate
    if formula == config.RISK_FORMULA_EXPOSURE:
        return (baseline_indef_rate - gated_indef_rate * decision_coverage) / baseline_indef_rate
    raise DataError(ErrorCode.INVALID_VALUE, f"알 수 없는 위험 감소 공식: {formula}")


def _fleet_rates(reports: Sequence[CohortReport]):
    """결정 수 가중 DI, AI, L3 비율. 비었으면 NaN."""
    total = sum(r.n for r in reports)
    if total == 0:
        return float("nan"), float("nan"), float("nan")
    di = sum(r.di * r.n for r in reports) / total
    ai = sum(r.ai * r.n for r in reports) / total
    indef = sum(r.indefensible for r in reports) / total
    return di, ai, indef


def scenario_row(fleet: Sequence[CohortReport], cfg: GateConfig, formula: str = config.DEFAULT_RISK_FORMULA) -> dict:
    passing = [r for r in fleet if evaluate_gate(r, cfg).passed]
    total = sum(r.n for r in fleet)
    passing_n = sum(r.n for r in passing)
    coverage = passing_n / total if total else 0.0
    _, _, baseline = _fleet_rates(fleet)
    di, ai, indef = _fleet_rates(passing)
    if passing and not np.isnan(baseline):
        try:
            reduction = risk_reduction(baseline, indef, coverage, formula)
        except DataError:
            reduction = float("nan")
    else:
        reduction = float("nan")
    return {
        "Scenario": cfg.scenario_name,
        "DI min": cfg.di_min,
        "AI max": cfg.ai_max,
        "Min decisions": cfg.min_decisions,
        "Communities passing": len(passing),
        "Community coverage (%)": 100.0 * len(passing) / len(fleet),
        "Decision coverage (%)": 100.0 * coverage,
        "Fleet DI (%)": 100.0 * di,
        "Fleet AI (%)": 100.0 * ai,
        "Indefensible rate (%)": 100.0 * indef,
        "Baseline indefensible (%)": 100.0 * baseline,
        "Risk reduction (%)": 100.0 * reduction,
        "risk_formula": formula,
    }


def scenario_sweep(
    fleet: Sequence[CohortReport],
    scenarios: Sequence[GateConfig],
    formulas: Iterable[str] = (config.RISK_FORMULA_RATE_RATIO, config.RISK_FORMULA_EXPOSURE),
) -> pd.DataFrame:
    """시나리오 × 위험 감소 공식마다 한 행. 공식 이름은 risk_formula 열에 남는다."""
    if not fleet:
        raise DataError(ErrorCode.EMPTY_COHORT, "게이트를 적용할 코호트가 없습니다")
    rows = [scenario_row(fleet, cfg, formula) for formula in formulas for cfg in scenarios]
    for row in rows:
        logger.info(
            "게이트 %s [%s]: 커뮤니티 %d개 통과, 결정 커버리지 %.1f%%",
            row["Scenario"], row["risk_formula"], row["Communities passing"], row["Decision coverage (%)"],
        )
    return pd.DataFrame(rows)


def gate_table(fleet: Sequence[CohortReport], cfg: GateConfig) -> pd.DataFrame:
    """코호트별 통과 여부와 binding 조건."""
    rows = []
    for r in fleet:
        outcome = evaluate_gate(r, cfg)
        rows.append({
            "cohort": r.cohort_id,
            "n": r.n,
            "DI (%)": 100.0 * r.di,
            "AI (%)": 100.0 * r.ai,
            "pass": outcome.passed,
            "binding_constraint": outcome.binding_constraint.value,
        })
    return pd.DataFrame(rows)


def coverage_risk_curve(
    fleet: Sequence[CohortReport],
    ai_max: float = config.GATE_AI_MAX,
    min_decisions: int = config.GATE_MIN_DECISIONS,
    di_grid: Optional[Sequence[float]] = None,
) -> pd.DataFrame:
    """AI 상한 고정, DI 하한을 훑으며 (결정 커버리지, 부적격률) 프런티어."""
    if not fleet:
        raise DataError(ErrorCode.EMPTY_COHORT, "게이트를 적용할 코호트가 없습니다")
    if di_grid is None:
        di_grid = np.round(np.linspace(0.50, 1.00, 51), 4)
    rows = []
    for di_min in di_grid:
        if di_min <= 0:
            continue
        row = scenario_row(fleet, GateConfig(float(di_min), ai_max, min_decisions, f"DI>={di_min:g}"))
        rows.append({
            "DI min": float(di_min),
            "Decision coverage (%)": row["Decision coverage (%)"],
            "Indefensible rate (%)": row["Indefensible rate (%)"],
            "Communities passing": row["Communities passing"],
        })
    return pd.DataFrame(rows)


# ==========================
# 시나리오 파일
# ==========================
def scenarios_from_dicts(items: Iterable[dict]) -> List[GateConfig]:
    out = []
    for i, obj in enumerate(items):
        if not isinstance(obj, dict):
            raise DataError(ErrorCode.SCHEMA_MISMATCH, f"시나리오 {i}번이 객체가 아닙니다")
        unknown = set(obj) - {"scenario_name", "di_min", "ai_max", "min_decisions"}
        if unknown:
            raise DataError(ErrorCode.SCHEMA_MISMATCH, f"시나리오 {i}번에 알 수 없는 키: {sorted(unknown)}")
        try:
            out.append(GateConfig(
                di_min=float(obj.get("di_min", config.GATE_DI_MIN)),
                ai_max=float(obj.get("ai_max", config.GATE_AI_MAX)),
                min_decisions=int(obj.get("min_decisions", config.GATE_MIN_DECISIONS)),
                scenario_name=str(obj.get("scenario_name", f"scenario-{i}")),
            ))
        except (TypeError, ValueError) as exc:
            raise DataError(ErrorCode.SCHEMA_MISMATCH, f"시나리오 {i}번 값 오류: {exc}") from exc
    return out


def default_scenarios() -> List[GateConfig]:
    return scenarios_from_dicts(config.DEFAULT_SCENARIOS)


def load_scenarios(path: str) -> List[GateConfig]:
    payload = read_json(path)
    if not isinstance(payload, list) or not payload:
        raise DataError(ErrorCode.SCHEMA_MISMATCH, f"시나리오 파일은 비어 있지 않은 배열이어야 합니다: {path}")
    return scenarios_from_dicts(payload)
