# -*- coding: utf-8 -*-
"""데이터셋(JSONL), 규칙 집합, 컬럼형 중간 산출물, 정답 사이드카 입출력."""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

import pandas as pd

from data.records import (
    AuditRecord,
    RuleSet,
    dumps_record,
    record_from_dict,
    rule_set_from_dict,
    rule_set_to_dict,
)
from util.errors import DataError, ErrorCode
from util.export import atomic_write_text, read_json, write_frame_csv

logger = logging.getLogger(__name__)


@dataclass
class LoadReport:
    """줄 단위 적재 결과. 깨진 줄은 (줄 번호, 사유)로 남긴다."""
    n_lines: int = 0
    records: List[AuditRecord] = field(default_factory=list)
    errors: List[Tuple[int, str]] = field(default_factory=list)
    duplicate_ids: List[str] = field(default_factory=list)

    @property
    def error_counts(self) -> Counter:
        return Counter(reason.split(":", 1)[0] for _, reason in self.errors)


class AuditDatasetLoader:
    """감사 데이터셋 적재기. 레코드 단위 오류는 건너뛰고, 파일 오류만 예외로 올린다."""

    def __init__(self, path: str):
        self.path = path

    def iter_lines(self) -> Iterable[Tuple[int, str]]:
        try:
            with open(self.path, "r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if line.strip():
                        yield lineno, line
        except OSError as exc:
            raise DataError(ErrorCode.IO_FAILURE, f"데이터셋을 열 수 없습니다: {self.path} ({exc})") from exc
        except UnicodeDecodeError as exc:
            raise DataError(ErrorCode.SCHEMA_MISMATCH, f"UTF-8이 아닙니다: {self.path}") from exc

    def load(self) -> LoadReport:
        report = LoadReport()
        seen = set()
        for lineno, line in self.iter_lines():
            report.n_lines += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                report.errors.append((lineno, f"JSON_DECODE: {exc.msg}"))
                continue
            if not isinstance(obj, dict):
                report.errors.append((lineno, "NOT_AN_OBJECT: 한 줄에 하나의 JSON 객체가 필요합니다"))
                continue
            try:
                record = record_from_dict(obj)
            except KeyError as exc:
                report.errors.append((lineno, f"MISSING_KEY: {exc.args[0]}"))
                continue
            except (TypeError, ValueError) as exc:
                report.errors.append((lineno, f"BAD_VALUE: {exc}"))
                continue
            if record.id in seen:
                report.duplicate_ids.append(record.id)
                report.errors.append((lineno, f"DUPLICATE_ID: {record.id}"))
                continue
            seen.add(record.id)
            report.records.append(record)
        if report.errors:
            logger.warning("데이터셋 %s: %d개 줄 건너뜀 %s", self.path, len(report.errors), dict(report.error_counts))
        logger.info("데이터셋 %s: %d줄 중 %d개 레코드 적재", self.path, report.n_lines, len(report.records))
        return report


def load_records(path: str) -> LoadReport:
    return AuditDatasetLoader(path).load()


def write_records(path: str, records: Iterable[AuditRecord]) -> str:
    return atomic_write_text(path, "".join(dumps_record(r) + "\n" for r in records))


def load_rule_sets(path: str) -> Dict[str, RuleSet]:
    """규칙 파일: RuleSet 객체의 배열. community_id로 색인한다."""
    payload = read_json(path)
    if not isinstance(payload, list):
        raise DataError(ErrorCode.SCHEMA_MISMATCH, f"규칙 파일은 배열이어야 합니다: {path}")
    rule_sets: Dict[str, RuleSet] = {}
    for obj in payload:
        try:
            rule_set = rule_set_from_dict(obj)
        except (KeyError, TypeError) as exc:
            raise DataError(ErrorCode.SCHEMA_MISMATCH, f"규칙 집합 형식 오류: {exc}") from exc
        problems = rule_set.violations()
        if problems:
            raise DataError(ErrorCode.SCHEMA_MISMATCH, "; ".join(problems))
        rule_sets[rule_set.community_id] = rule_set
    return rule_sets


def write_rule_sets(path: str, rule_sets: Iterable[RuleSet]) -> str:
    payload = [rule_set_to_dict(rs) for rs in rule_sets]
    return atomic_write_text(path, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")


def load_frame(path: str) -> pd.DataFrame:
    """컬럼형 중간 산출물(CSV)."""
    try:
        frame = pd.read_csv(path, keep_default_na=True)
    except (OSError, pd.errors.EmptyDataError) as exc:
        raise DataError(ErrorCode.IO_FAILURE, f"표를 읽을 수 없습니다: {path} ({exc})") from exc
    except pd.errors.ParserError as exc:
        raise DataError(ErrorCode.SCHEMA_MISMATCH, f"CSV 형식 오류: {path} ({exc})") from exc
    required = {"id", "community_id", "level", "inverse_check"}
    missing = required - set(frame.columns)
    if missing:
        raise DataError(ErrorCode.SCHEMA_MISMATCH, f"{path}에 필요한 열이 없습니다: {sorted(missing)}")
    frame["id"] = frame["id"].astype(str)
    frame["community_id"] = frame["community_id"].astype(str)
    if "case_id" in frame.columns:
        frame["case_id"] = frame["case_id"].astype(str)
    # 빈 human_action은 NaN 대신 None
    if "human_action" in frame.columns:
        frame["human_action"] = frame["human_action"].where(frame["human_action"].notna(), None)
    return frame


def save_frame(path: str, frame: pd.DataFrame) -> str:
    return write_frame_csv(path, frame)


def load_truth(path: str) -> pd.DataFrame:
    """시뮬레이터 정답 사이드카."""
    try:
        truth = pd.read_csv(path)
    except (OSError, pd.errors.EmptyDataError) as exc:
        raise DataError(ErrorCode.IO_FAILURE, f"정답 파일을 읽을 수 없습니다: {path} ({exc})") from exc
    for col in ("record_id", "case_id"):
        if col in truth.columns:
            truth[col] = truth[col].astype(str)
    return truth
