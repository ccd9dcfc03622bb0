# -*- coding: utf-8 -*-
"""CLI report 명령과 대시보드가 함께 쓰는 보고 표 묶음."""
from __future__ import annotations

import logging
from typing import Dict, Mapping, Optional, Sequence

import pandas as pd

from data.records import RuleSet
from insight import analyzer, calibration, governance_gate, grounding, stability
from util.errors import AuditEngineError

logger = logging.getLogger(__name__)


def _safe(name: str, fn, *args, **kwargs) -> Optional[pd.DataFrame]:
    try:
        return fn(*args, **kwargs)
    except AuditEngineError as exc:
        logger.warning("보고 표 '%s' 생략: %s", name, exc)
        return None


def has_replicates(frame: pd.DataFrame) -> bool:
    if "case_id" not in frame.columns or frame.empty:
        return False
    return bool((frame.groupby(["case_id", "temperature"]).size() >= 2).any())


def build_report_tables(
    frame: pd.DataFrame,
    model: calibration.CalibrationModel,
    scenarios: Sequence[governance_gate.GateConfig],
    rule_sets: Optional[Mapping[str, RuleSet]] = None,
    truth: Optional[pd.DataFrame] = None,
    bins: int = 10,
) -> Dict[str, pd.DataFrame]:
    """입력 표 하나로 만들 수 있는 보고 표를 모두 만든다. 만들 수 없는 표는 빠진다."""
    frame = frame.copy()
    frame["S"] = calibration.score_frame(frame, model)
    tables: Dict[str, Optional[pd.DataFrame]] = {}

    reports = analyzer.build_fleet_reports(frame)
    tables["Agreement gap by cohort"] = analyzer.agreement_gap_table(reports)
    tables["Cohort metrics"] = analyzer.cohort_table(reports)
    tables["Fleet governance states"] = analyzer.fleet_state_summary(reports)
    tables["Calibrated weights"] = pd.DataFrame([calibration.model_summary(model)])
    tables["Held-out ECE by temperature"] = _safe("ece", calibration.held_out_ece_table, frame, model, bins)
    tables["sigma_rho vs inverse check"] = _safe("sigma_rho", analyzer.sigma_rho_table, frame)
    tables["Per-level profile"] = analyzer.level_profile_table(frame, frame["S"])
    tables["Gate scenarios"] = _safe("gate", governance_gate.scenario_sweep, reports, scenarios)

    if has_replicates(frame):
        cases = stability.sweep_cases_from_frame(frame)
        groups = stability.groups_from_truth(truth, cases)
        tables["Temperature sweep"] = _safe("sweep", stability.temperature_sweep_table, cases, groups)

    if rule_sets:
        verdicts = grounding.verify_frame(frame, rule_sets, frame["S"])
        tables["Grounding verdicts"] = verdicts
        if truth is not None and "adversarial" in truth.columns and not verdicts.empty:
            tables["Adversarial summary"] = grounding.adversarial_summary(verdicts, truth)

    return {name: t for name, t in tables.items() if t is not None and not t.empty}
