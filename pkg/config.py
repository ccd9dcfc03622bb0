# -*- coding: utf-8 -*-
"""감사 엔진 전역 설정.

상수는 이 모듈에 모으고, 필요한 몇 가지 기본값만 환경변수(.env)로 덮어쓴다.
"""
import os

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    return float(raw) if raw not in (None, "") else default


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    return int(raw) if raw not in (None, "") else default


# ==========================
# 로깅
# ==========================
LOG_LEVEL = os.getenv("AUDIT_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s %(levelname)s [%(name)s] %(message)s"

# ==========================
# 추출 / 캘리브레이션
# ==========================
CLAMP_EPS = 1e-12
MAX_TOP_CANDIDATES = 20
ECE_BINS = _env_int("AUDIT_ECE_BINS", 10)
WEIGHT_SUM_TOL = 1e-9
FIT_MAX_ITER = 500
DEFAULT_COMPONENT = "h_w"
WEIGHTS_FILE_KEYS = ("alpha", "beta", "gamma", "component", "loss", "n_samples")
WEIGHTS_FILENAME = "pds_weights.json"

# 참고용 가중치 (공개된 균형 표본 적합 결과, 테스트 대상 아님)
REFERENCE_WEIGHTS = {
    "alpha": 0.6289,
    "beta": 0.0114,
    "gamma": 0.3598,
    "component": "h_w",
    "loss": 0.3127,
    "n_samples": 19899,
}

# held-out ECE 분할 비율 (id 해시 기준)
HOLDOUT_FRACTION = 0.5
ECE_TARGET = 0.05

# ==========================
# 거버넌스 게이트
# ==========================
GATE_DI_MIN = _env_float("AUDIT_GATE_DI_MIN", 0.90)
GATE_AI_MAX = _env_float("AUDIT_GATE_AI_MAX", 0.15)
GATE_MIN_DECISIONS = _env_int("AUDIT_GATE_MIN_DECISIONS", 25)

DEFAULT_SCENARIOS = [
    {"scenario_name": "Lenient", "di_min": 0.80, "ai_max": 0.20, "min_decisions": 25},
    {"scenario_name": "Moderate", "di_min": 0.85, "ai_max": 0.15, "min_decisions": 25},
    {"scenario_name": "Standard", "di_min": 0.90, "ai_max": 0.15, "min_decisions": 25},
    {"scenario_name": "Strict", "di_min": 0.95, "ai_max": 0.10, "min_decisions": 25},
]

RISK_FORMULA_RATE_RATIO = "rate_ratio"
RISK_FORMULA_EXPOSURE = "exposure_weighted"
DEFAULT_RISK_FORMULA = RISK_FORMULA_RATE_RATIO

# ==========================
# 안정성 분석
# ==========================
STABILITY_CLASS_BOUNDS = [
    (0.95, "ROCK_SOLID"),
    (0.80, "MOSTLY_STABLE"),
    (0.60, "MODERATE"),
    (0.0, "HIGHLY_UNSTABLE"),
]
BOUNDARY_P_L3 = (0.10, 0.90)
FLATNESS_BOUND = 0.25
SWEEP_TEMPERATURES = [0.1, 0.3, 0.7, 1.0]

# ==========================
# 그라운딩 검증
# ==========================
VERIFIER_S_MIN = 0.10
VERIFIER_OVERLAP_MIN = 0.5
DEFAULT_H_KAPPA_BAND = (0.0, 0.25)
CLEAN_BAND_PERCENTILE = 95.0

# ==========================
# 시뮬레이터
# ==========================
SIM_CITATION_TOKENS = 25
SIM_TRUE_WEIGHTS = (0.6, 0.1, 0.3)
SIM_TEMPERATURE = 0.2
SIM_N_COHORTS = 20
SIM_COHORT_SIZE = (30, 90)
SIM_LOGIT_JITTER = 0.5

# ==========================
# 시각화 및 UI 설정
# ==========================
AUDIT_COLORS = {
    'primary': '#E31E24',
    'secondary': '#FF6B35',
    'accent': '#004EA2',
    'success': '#00A651',
    'warning': '#FF9500',
    'neutral': '#6C757D',
}

LEVEL_COLORS = {
    'L1': '#00A651',
    'L2': '#F0E68C',
    'L3': '#E31E24',
}

STATE_COLORS = {
    'EARNED_AUTONOMY': '#00A651',
    'POLICY_GAPS': '#E31E24',
    'NORMATIVE_COMPLEXITY': '#FF9500',
    'UNDER_MINIMUM': '#6C757D',
}

VERDICT_COLORS = {
    'CLEAN': '#AEC6CF',
    'FLAG_PDS': '#FF9500',
    'FLAG_GROUNDING': '#DDA0DD',
    'FLAG_BOTH': '#E31E24',
}

GROUP_COLORS = {
    'FLIPPER': '#FF6B35',
    'STABLE': '#004EA2',
}
