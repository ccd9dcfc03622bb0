# -*- coding: utf-8 -*-
"""엔진 공통 오류 코드와 예외 계층."""
from __future__ import annotations

from enum import Enum
from typing import Any, Optional


class ErrorCode(str, Enum):
    MALFORMED_TRACE = "MALFORMED_TRACE"
    MISSING_FIELD = "MISSING_FIELD"
    INVALID_VALUE = "INVALID_VALUE"
    SPAN_NOT_FOUND = "SPAN_NOT_FOUND"
    UNCOVERED_SPAN = "UNCOVERED_SPAN"
    FIELD_TOKEN_NOT_FOUND = "FIELD_TOKEN_NOT_FOUND"
    NO_LEVEL_CANDIDATE = "NO_LEVEL_CANDIDATE"
    EMPTY_SPAN = "EMPTY_SPAN"
    MISSING_CANDIDATES = "MISSING_CANDIDATES"
    NO_WEIGHT_CANDIDATE = "NO_WEIGHT_CANDIDATE"
    MISSING_POLARITY = "MISSING_POLARITY"
    MISSING_COMPONENT = "MISSING_COMPONENT"
    DEGENERATE_LABELS = "DEGENERATE_LABELS"
    NON_CONVERGENCE = "NON_CONVERGENCE"
    TOO_FEW_SAMPLES = "TOO_FEW_SAMPLES"
    IO_FAILURE = "IO_FAILURE"
    SCHEMA_MISMATCH = "SCHEMA_MISMATCH"
    EMPTY_COHORT = "EMPTY_COHORT"
    NO_FALSE_NEGATIVES = "NO_FALSE_NEGATIVES"
    NO_AGREEMENTS = "NO_AGREEMENTS"
    COHORT_TOO_SMALL = "COHORT_TOO_SMALL"
    ZERO_BASELINE = "ZERO_BASELINE"
    TOO_FEW_REPLICATES = "TOO_FEW_REPLICATES"
    LENGTH_MISMATCH = "LENGTH_MISMATCH"
    ZERO_VARIANCE = "ZERO_VARIANCE"
    EMPTY_GROUP = "EMPTY_GROUP"
    ZERO_DENOMINATOR = "ZERO_DENOMINATOR"
    EMPTY_CITATION = "EMPTY_CITATION"
    USAGE = "USAGE"


class AuditEngineError(Exception):
    """코드가 붙은 엔진 예외. record_id가 있으면 메시지에 함께 남긴다."""

    exit_code = 1

    def __init__(
        self,
        code: ErrorCode,
        message: str = "",
        record_id: Optional[str] = None,
        detail: Any = None,
    ):
        self.code = code
        self.message = message or code.value
        self.record_id = record_id
        self.detail = detail
        prefix = f"[{code.value}]"
        if record_id is not None:
            prefix += f" record={record_id}"
        super().__init__(f"{prefix} {self.message}")


class DataError(AuditEngineError):
    exit_code = 1


class UsageError(AuditEngineError):
    exit_code = 2

    def __init__(self, message: str):
        super().__init__(ErrorCode.USAGE, message)
