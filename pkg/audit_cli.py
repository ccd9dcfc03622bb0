# -*- coding: utf-8 -*-
"""감사 엔진 명령행 진입점.

    python audit_cli.py simulate --out run/ --seed 7
    python audit_cli.py extract --input run/dataset.jsonl --out run/pds.csv
    python audit_cli.py calibrate --input run/pds.csv --out run/pds_weights.json
    python audit_cli.py ece --input run/pds.csv --weights run/pds_weights.json
    python audit_cli.py gate --input run/pds.csv --scenarios scenarios.json

종료 코드: 0 성공, 1 데이터 오류, 2 사용법 오류.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence

import pandas as pd

import config
from data.loader import load_frame, load_records, load_rule_sets, load_truth, save_frame
from data.preprocess import PdsExtractionProcessor
from data.records import is_valid_audit, validate_record
from data.simulator import Hypothesis, LabelMode, SimConfig, generate_fleet, sweep_cases, write_fleet
from data.trace_parser import build_audit_trace
from insight import analyzer, calibration, governance_gate, grounding, stability
from insight.report import build_report_tables
from util.errors import AuditEngineError, DataError, ErrorCode, UsageError
from util.export import format_tables_text, write_json, write_report

logger = logging.getLogger("audit_cli")


# ==========================
# 공통
# ==========================
def _emit(tables: Dict[str, pd.DataFrame], out: Optional[str], metadata: Optional[dict] = None):
    sys.stdout.write(format_tables_text(tables))
    if out:
        write_report(out, tables, metadata)
        logger.info("보고서 저장: %s", out)


def _require(args, *names: str):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        raise UsageError(f"{args.command}: 필수 옵션 누락 {', '.join(missing)}")


def _gate_config(args) -> governance_gate.GateConfig:
    try:
        return governance_gate.GateConfig(args.di_min, args.ai_max, args.min_decisions, "CLI")
    except DataError as exc:
        raise UsageError(exc.message) from exc


def _scenarios(args) -> List[governance_gate.GateConfig]:
    if args.scenarios:
        return governance_gate.load_scenarios(args.scenarios)
    if args.di_min_given or args.ai_max_given or args.min_decisions_given:
        return [_gate_config(args)]
    return governance_gate.default_scenarios()


def _model(args) -> calibration.CalibrationModel:
    return calibration.load_weights(args.weights or config.WEIGHTS_FILENAME, fallback=True, component=args.component)


def _thresholds(args) -> dict:
    return {"di_threshold": args.di_min, "ai_threshold": args.ai_max, "min_size": args.min_decisions}


# ==========================
# 하위 명령
# ==========================
def cmd_ingest(args) -> int:
    _require(args, "input")
    report = load_records(args.input)
    n_valid = 0
    invalid: Dict[str, int] = {}
    for record in report.records:
        if validate_record(record):
            invalid["INVALID_RECORD"] = invalid.get("INVALID_RECORD", 0) + 1
            continue
        try:
            trace = build_audit_trace(record)
        except AuditEngineError as exc:
            invalid[exc.code.value] = invalid.get(exc.code.value, 0) + 1
            continue
        if is_valid_audit(record, trace):
            n_valid += 1
        else:
            invalid["INCOMPLETE_TRACE"] = invalid.get("INCOMPLETE_TRACE", 0) + 1
    summary = {
        "lines": report.n_lines,
        "records": len(report.records),
        "valid_audits": n_valid,
        "line_errors": dict(report.error_counts),
        "record_errors": invalid,
        "skipped_lines": [{"line": n, "reason": r} for n, r in report.errors],
    }
    sys.stdout.write(
        f"lines={report.n_lines} records={len(report.records)} valid_audits={n_valid} "
        f"line_errors={dict(report.error_counts)} record_errors={invalid}\n"
    )
    if args.out:
        write_json(args.out, summary)
    return 0


def cmd_extract(args) -> int:
    _require(args, "input", "out")
    loaded = load_records(args.input)
    result = PdsExtractionProcessor().process_records(loaded.records, n_lines=loaded.n_lines)
    frame = result.frame
    if args.weights:
        frame = frame.copy()
        frame["S"] = calibration.score_frame(frame, _model(args))
    save_frame(args.out, frame)
    summary = {
        "lines": loaded.n_lines,
        "line_errors": dict(loaded.error_counts),
        "valid_audits": result.n_valid,
        "citation_detected": result.citation_detected,
        "citation_detection_rate": result.detection_rate if result.n_valid else None,
        "attrition": dict(result.attrition),
        "failures": [{"id": rid, "reason": reason} for rid, reason in result.failures],
    }
    write_json(os.path.splitext(args.out)[0] + ".summary.json", summary)
    sys.stdout.write(f"rows={result.n_valid} attrition={dict(result.attrition)}\n")
    return 0


def cmd_calibrate(args) -> int:
    _require(args, "input")
    frame = load_frame(args.input)
    if not 0.0 <= args.holdout_fraction < 1.0:
        raise UsageError(f"--holdout-fraction는 [0, 1) 범위여야 합니다: {args.holdout_fraction}")
    fit_on = frame
    if args.holdout_fraction > 0:
        fit_on, _ = calibration.split_frame(frame, args.holdout_fraction)
    model = calibration.fit_frame(fit_on, args.component)
    out = args.out or config.WEIGHTS_FILENAME
    calibration.save_weights(model, out)
    sys.stdout.write(
        f"alpha={model.alpha:.6f} beta={model.beta:.6f} gamma={model.gamma:.6f} "
        f"loss={model.loss:.6f} n={model.n_samples} converged={model.converged}\n"
    )
    return 0


def cmd_ece(args) -> int:
    _require(args, "input")
    frame = load_frame(args.input)
    model = _model(args)
    held = frame
    if args.holdout_fraction > 0:
        _, held = calibration.split_frame(frame, args.holdout_fraction)
    scores = calibration.score_frame(held, model)
    usable = scores.notna()
    labels = calibration.frame_labels(held)[usable.to_numpy()]
    ece = calibration.compute_ece(scores[usable].to_numpy(), labels, args.bins)
    tables = {
        "Held-out ECE by temperature": calibration.held_out_ece_table(held, model, args.bins),
        "Reliability (held-out)": calibration.reliability_table(scores[usable].to_numpy(), labels, args.bins),
    }
    sys.stdout.write(f"ece={ece:.6f} n={int(usable.sum())} bins={args.bins} fallback_weights={model.fallback}\n")
    _emit(tables, args.out, {"ece": ece, "bins": args.bins, "component": model.component.value})
    return 0


def cmd_evaluate(args) -> int:
    _require(args, "input")
    frame = load_frame(args.input)
    reports = analyzer.build_fleet_reports(frame, by=args.by, **_thresholds(args))
    split = analyzer.disagreement_split(analyzer.decisions_from_frame(frame))
    tables = {
        "Agreement gap by cohort": analyzer.agreement_gap_table(reports),
        "Cohort metrics": analyzer.cohort_table(reports),
        "Fleet governance states": analyzer.fleet_state_summary(reports),
        "Disagreement root cause": pd.DataFrame([split]),
    }
    if args.by != "community_id":
        tables["Rule specificity comparison"] = analyzer.rule_tier_table(reports)
    _emit(tables, args.out)
    return 0


def cmd_gate(args) -> int:
    _require(args, "input")
    frame = load_frame(args.input)
    scenarios = _scenarios(args)
    reports = analyzer.build_fleet_reports(frame, **_thresholds(args))
    per_cohort = pd.concat(
        [governance_gate.gate_table(reports, cfg).assign(Scenario=cfg.scenario_name) for cfg in scenarios],
        ignore_index=True,
    )
    tables = {
        "Gate scenarios": governance_gate.scenario_sweep(reports, scenarios),
        "Gate outcome per cohort": per_cohort,
        "Coverage-risk frontier": governance_gate.coverage_risk_curve(reports, args.ai_max, args.min_decisions),
    }
    _emit(tables, args.out)
    return 0


def cmd_stability(args) -> int:
    temperatures = args.temperatures or config.SWEEP_TEMPERATURES
    if args.simulate:
        if args.replicates < 2:
            raise UsageError("--replicates는 2 이상이어야 합니다")
        cfg = SimConfig(
            replicates=args.replicates, hypothesis=Hypothesis(args.hypothesis), seed=args.seed,
            label_mode=LabelMode.TOKEN,
        )
        cases, groups = stability.simulated_sweep(sweep_cases(args.seed), cfg, temperatures)
    else:
        _require(args, "input")
        frame = load_frame(args.input)
        frame["S"] = calibration.score_frame(frame, _model(args))
        cases = stability.sweep_cases_from_frame(frame)
        if not cases:
            raise DataError(ErrorCode.TOO_FEW_REPLICATES, "반복 감사가 2회 이상인 케이스가 없습니다")
        truth = load_truth(args.truth) if args.truth else None
        groups = stability.groups_from_truth(truth, cases)

    tables = {
        "Temperature sweep": stability.temperature_sweep_table(cases, groups),
        "Stability profiles": stability.profile_table(cases, groups),
    }
    metadata = {}
    try:
        ratios = stability.ratios_by_temperature(cases, groups)
        flat = stability.ratio_flatness_test(ratios, args.flatness_bound)
        tables["Ratio flatness"] = pd.DataFrame([{
            "range": flat.range, "slope (per unit T)": flat.slope,
            "approaches_one": flat.approaches_one, "verdict": flat.verdict.value,
        }])
        metadata["flatness"] = flat.verdict.value
    except DataError as exc:
        logger.warning("비율 평탄성 검정 생략: %s", exc)
    _emit(tables, args.out, metadata)
    return 0


def cmd_verify(args) -> int:
    _require(args, "input", "rules")
    frame = load_frame(args.input)
    rule_sets = load_rule_sets(args.rules)
    model = _model(args)
    scores = calibration.score_frame(frame, model)
    floor = calibration.score_floor(model)
    if floor is not None and args.s_min <= floor:
        logger.warning("S 하한 %.3f 가 S 최솟값 %.3f 이하: FLAG_PDS는 나오지 않습니다", args.s_min, floor)
    truth = load_truth(args.truth) if args.truth else None
    band = tuple(args.h_kappa_band) if args.h_kappa_band else config.DEFAULT_H_KAPPA_BAND
    if args.clean_band and truth is not None and "adversarial" in truth.columns:
        clean_ids = set(truth.loc[truth["adversarial"] == "clean", "record_id"])
        band = grounding.clean_band(frame.loc[frame["id"].isin(clean_ids), "h_kappa"].tolist())
    verdicts = grounding.verify_frame(frame, rule_sets, scores, args.s_min, args.overlap_min, band)
    tables = {"Grounding verdicts": verdicts}
    if truth is not None and "adversarial" in truth.columns and not verdicts.empty:
        tables["Adversarial summary"] = grounding.adversarial_summary(verdicts, truth)
    _emit(tables, args.out, {"h_kappa_band": band, "s_min": args.s_min, "overlap_min": args.overlap_min})
    return 0


def cmd_simulate(args) -> int:
    _require(args, "out")
    try:
        cfg = SimConfig(
            temperature=args.temperature if args.temperature is not None else config.SIM_TEMPERATURE,
            replicates=args.replicates,
            hypothesis=Hypothesis(args.hypothesis),
            seed=args.seed,
            n_cohorts=args.cohorts,
            adversarial_fraction=args.adversarial_fraction,
            label_mode=LabelMode(args.label_mode),
        )
    except DataError as exc:
        raise UsageError(exc.message) from exc
    paths = write_fleet(generate_fleet(cfg), args.out)
    sys.stdout.write("".join(f"{k}={v}\n" for k, v in sorted(paths.items())))
    return 0


def cmd_report(args) -> int:
    _require(args, "input", "out")
    frame = load_frame(args.input)
    model = _model(args)
    rule_sets = load_rule_sets(args.rules) if args.rules else None
    truth = load_truth(args.truth) if args.truth else None
    tables = build_report_tables(frame, model, _scenarios(args), rule_sets, truth, args.bins)
    _emit(tables, args.out, {"component": model.component.value, "fallback_weights": model.fallback})
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "calibrate": cmd_calibrate,
    "ece": cmd_ece,
    "evaluate": cmd_evaluate,
    "gate": cmd_gate,
    "stability": cmd_stability,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


# ==========================
# 인자
# ==========================
class _Tracked(argparse.Action):
    """값과 함께 '명시적으로 주었는지'를 <dest>_given에 남긴다."""

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        setattr(namespace, f"{self.dest}_given", True)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"1 이상의 정수가 필요합니다: {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input")
    common.add_argument("--out")
    common.add_argument("--rules")
    common.add_argument("--weights")
    common.add_argument("--truth")
    common.add_argument("--component", choices=[c.value for c in calibration.EntropyComponent], default=config.DEFAULT_COMPONENT)
    common.add_argument("--bins", type=_positive_int, default=config.ECE_BINS)
    common.add_argument("--di-min", type=float, default=config.GATE_DI_MIN, action=_Tracked)
    common.add_argument("--ai-max", type=float, default=config.GATE_AI_MAX, action=_Tracked)
    common.add_argument("--min-decisions", type=_positive_int, default=config.GATE_MIN_DECISIONS, action=_Tracked)
    common.add_argument("--scenarios")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--temperature", type=float)
    common.add_argument("--replicates", type=_positive_int, default=1)
    common.add_argument("--log-level", default=config.LOG_LEVEL, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.set_defaults(di_min_given=False, ai_max_given=False, min_decisions_given=False)

    parser = argparse.ArgumentParser(prog="audit_cli", description="moderation decision defensibility audit engine")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("ingest", "extract", "evaluate", "gate", "report"):
        sub.add_parser(name, parents=[common])

    for name in ("calibrate", "ece"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--holdout-fraction", type=float, default=config.HOLDOUT_FRACTION)

    sub.choices["evaluate"].add_argument("--by", default="community_id")

    p = sub.add_parser("stability", parents=[common])
    p.add_argument("--simulate", action="store_true")
    p.add_argument("--hypothesis", choices=[h.value for h in Hypothesis], default=Hypothesis.H_G.value)
    p.add_argument("--temperatures", type=float, nargs="+")
    p.add_argument("--flatness-bound", type=float, default=config.FLATNESS_BOUND)

    p = sub.add_parser("verify", parents=[common])
    p.add_argument("--s-min", type=float, default=config.VERIFIER_S_MIN)
    p.add_argument("--overlap-min", type=float, default=config.VERIFIER_OVERLAP_MIN)
    p.add_argument("--h-kappa-band", type=float, nargs=2)
    p.add_argument("--clean-band", action="store_true")

    p = sub.add_parser("simulate", parents=[common])
    p.add_argument("--hypothesis", choices=[h.value for h in Hypothesis], default=Hypothesis.H_G.value)
    p.add_argument("--cohorts", type=_positive_int, default=config.SIM_N_COHORTS)
    p.add_argument("--adversarial-fraction", type=float, default=0.0)
    p.add_argument("--label-mode", choices=[m.value for m in LabelMode], default=LabelMode.CALIBRATED.value)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, args.log_level), format=config.LOG_FORMAT)
    try:
        return COMMANDS[args.command](args)
    except AuditEngineError as exc:
        logger.error("%s 실패: %s", args.command, exc)
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
