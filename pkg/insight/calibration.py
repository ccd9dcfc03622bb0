# -*- coding: utf-8 -*-
"""PDS 벡터의 스칼라 축약 S, 최대우도 가중치 적합, 동일빈도 ECE.

S = exp(α·λ_ξ + β·(−H) + γ·(−σ(ρ))),  (α, β, γ) = softmax(u)
"""
from __future__ import annotations

import hashlib
import logging
import math
import os
from dataclasses import asdict, dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize

import config
from data.preprocess import PdsVector
from data.records import DefensibilityLevel
from util.errors import DataError, ErrorCode
from util.export import read_json, write_json

logger = logging.getLogger(__name__)


class EntropyComponent(str, Enum):
    H_W = "h_w"
    H_KAPPA = "h_kappa"


@dataclass(frozen=True)
class CalibrationModel:
    alpha: float
    beta: float
    gamma: float
    component: EntropyComponent = EntropyComponent.H_W
    loss: float = float("nan")
    n_samples: int = 0
    fallback: bool = False
    converged: bool = True

    def __post_init__(self):
        weights = (self.alpha, self.beta, self.gamma)
        if not all(w > 0 for w in weights):
            raise DataError(ErrorCode.SCHEMA_MISMATCH, f"가중치는 모두 양수여야 합니다: {weights}")
        if abs(sum(weights) - 1.0) > config.WEIGHT_SUM_TOL:
            raise DataError(ErrorCode.SCHEMA_MISMATCH, f"가중치 합이 1이 아닙니다: {sum(weights)!r}")
        if not isinstance(self.component, EntropyComponent):
            object.__setattr__(self, "component", EntropyComponent(self.component))

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma], dtype=float)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "component": self.component.value,
            "loss": None if math.isnan(self.loss) else self.loss,
            "n_samples": self.n_samples,
        }


def equal_weights_model(component: EntropyComponent = EntropyComponent.H_W, fallback: bool = True) -> CalibrationModel:
    third = 1.0 / 3.0
    return CalibrationModel(third, third, third, component, float("nan"), 0, fallback=fallback)


def softmax_weights(u: Sequence[float]) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    e = np.exp(u - u.max())
    return e / e.sum()


def calibration_label(level: DefensibilityLevel) -> int:
    """y = 1 iff 감사 레벨이 L1/L2."""
    return int(DefensibilityLevel(level).is_defensible)


def _entropy_value(v: PdsVector, component: EntropyComponent) -> Optional[float]:
    return v.h_w if component is EntropyComponent.H_W else v.h_kappa


def score_floor(m: CalibrationModel) -> Optional[float]:
    """S가 가질 수 있는 최솟값. λ ≥ ln(1/3), H[w] ≤ log2 3, σ ≤ 1에서 나온다.

    단순체 위에서는 exp(−log2 3) ≈ 0.205보다 작아지지 않는다.
    H[κ]는 상한이 후보 수에 달려 있어 None.
    """
    if m.component is not EntropyComponent.H_W:
        return None
    return math.exp(-(m.alpha * math.log(3.0) + m.beta * math.log2(3.0) + m.gamma))


def scalar_collapse(v: PdsVector, m: CalibrationModel) -> float:
    h = _entropy_value(v, m.component)
    missing = [
        name for name, value, comp in (
            ("lambda_xi", v.lambda_xi, "lambda_xi"),
            (m.component.value, h, m.component.value),
            ("sigma_rho", v.sigma_rho, "sigma_rho"),
        )
        if value is None or not v.is_ok(comp)
    ]
    if missing:
        raise DataError(ErrorCode.MISSING_COMPONENT, f"성분 없음: {', '.join(missing)}", detail=missing)
    z = m.alpha * v.lambda_xi + m.beta * (-h) + m.gamma * (-v.sigma_rho)
    return float(min(max(math.exp(z), config.CLAMP_EPS), 1.0))


def design_matrix(lambda_xi, h, sigma_rho) -> np.ndarray:
    """열 순서 (λ_ξ, −H, −σ(ρ)). 방향이 반영된 특성."""
    return np.column_stack([np.asarray(lambda_xi, float), -np.asarray(h, float), -np.asarray(sigma_rho, float)])


def collapse_scores(lambda_xi, h, sigma_rho, weights: Sequence[float]) -> np.ndarray:
    z = design_matrix(lambda_xi, h, sigma_rho) @ np.asarray(weights, float)
    return np.clip(np.exp(z), config.CLAMP_EPS, 1.0)


def calibration_loss(u: Sequence[float], X: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """평균 이진 교차엔트로피와 u에 대한 해석적 기울기.

    S는 손실 안에서만 [ε, 1−ε]로 자른다. 잘린 표본의 기울기는 0.
    """
    eps = config.CLAMP_EPS
    w = softmax_weights(u)
    S = np.exp(X @ w)
    Sc = np.clip(S, eps, 1.0 - eps)
    n = len(y)
    loss = -float(np.sum(y * np.log(Sc) + (1.0 - y) * np.log1p(-Sc))) / n

    inside = (S > eps) & (S < 1.0 - eps)
    odds = np.divide(S, 1.0 - S, out=np.zeros_like(S), where=inside)
    dz = np.where(inside, -y + (1.0 - y) * odds, 0.0) / n
    grad_w = X.T @ dz
    grad_u = w * (grad_w - float(w @ grad_w))
    return loss, grad_u


def fit_arrays(
    lambda_xi,
    h,
    sigma_rho,
    y,
    component: EntropyComponent = EntropyComponent.H_W,
    max_iter: int = config.FIT_MAX_ITER,
) -> CalibrationModel:
    X = design_matrix(lambda_xi, h, sigma_rho)
    y = np.asarray(y, dtype=float)
    if len(y) < 2:
        raise DataError(ErrorCode.TOO_FEW_SAMPLES, f"적합에는 표본 2개 이상이 필요합니다 (n={len(y)})")
    if y.min() == y.max():
        raise DataError(ErrorCode.DEGENERATE_LABELS, f"라벨이 한 종류뿐입니다 (y={int(y[0])})")

    u0 = np.zeros(3)
    start_loss, _ = calibration_loss(u0, X, y)
    result = minimize(
        calibration_loss, u0, args=(X, y), jac=True, method="L-BFGS-B", options={"maxiter": max_iter},
    )
    u_best, loss_best = (result.x, float(result.fun)) if result.fun <= start_loss else (u0, start_loss)
    if not result.success:
        logger.warning("[%s] L-BFGS-B 미수렴 (%s), 최선 반복값 사용", ErrorCode.NON_CONVERGENCE.value, result.message)
    w = softmax_weights(u_best)
    model = CalibrationModel(
        float(w[0]), float(w[1]), float(w[2]),
        component=component, loss=loss_best, n_samples=int(len(y)), converged=bool(result.success),
    )
    logger.info(
        "가중치 적합: α=%.4f β=%.4f γ=%.4f loss=%.4f (동일가중 %.4f) n=%d",
        model.alpha, model.beta, model.gamma, model.loss, start_loss, model.n_samples,
    )
    return model


def fit_weights(
    samples: Sequence[Tuple[PdsVector, int]],
    component: EntropyComponent = EntropyComponent.H_W,
) -> CalibrationModel:
    """(PdsVector, 라벨) 목록으로 적합. 필요한 성분이 빠진 표본은 제외하고 개수를 기록한다."""
    component = EntropyComponent(component)
    rows = []
    excluded = 0
    for v, label in samples:
        h = _entropy_value(v, component)
        if v.lambda_xi is None or h is None or v.sigma_rho is None:
            excluded += 1
            continue
        rows.append((v.lambda_xi, h, v.sigma_rho, label))
    if excluded:
        logger.info("적합 제외 표본 %d개 (성분 누락)", excluded)
    if not rows:
        raise DataError(ErrorCode.TOO_FEW_SAMPLES, "적합 가능한 표본이 없습니다")
    arr = np.array(rows, dtype=float)
    return fit_arrays(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], component)


# ==========================
# ECE
# ==========================
def equal_frequency_bins(scores, labels, bins: int = config.ECE_BINS) -> List[np.ndarray]:
    """S 오름차순(동률은 y)으로 정렬한 인덱스를 크기 차이 1 이하의 연속 묶음으로 나눈다."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    if len(s) != len(y):
        raise DataError(ErrorCode.LENGTH_MISMATCH, "점수와 라벨 길이가 다릅니다")
    if len(s) < bins:
        raise DataError(ErrorCode.TOO_FEW_SAMPLES, f"표본 {len(s)}개 < 빈 {bins}개")
    order = np.lexsort((y, s))
    return np.array_split(order, bins)


def compute_ece(scores, labels, bins: int = config.ECE_BINS) -> float:
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    groups = equal_frequency_bins(s, y, bins)
    n = len(s)
    return float(sum(len(g) / n * abs(s[g].mean() - y[g].mean()) for g in groups))


def reliability_table(scores, labels, bins: int = config.ECE_BINS) -> pd.DataFrame:
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    rows = []
    for b, g in enumerate(equal_frequency_bins(s, y, bins), start=1):
        rows.append({
            "bin": b,
            "n": len(g),
            "S_min": float(s[g].min()),
            "S_max": float(s[g].max()),
            "mean_S (prob)": float(s[g].mean()),
            "defensible_rate (prob)": float(y[g].mean()),
            "gap (prob)": float(abs(s[g].mean() - y[g].mean())),
        })
    return pd.DataFrame(rows)


# ==========================
# 가중치 파일
# ==========================
def save_weights(m: CalibrationModel, path: str) -> str:
    return write_json(path, m.to_dict())


def load_weights(path: str, fallback: bool = True, component: EntropyComponent = EntropyComponent.H_W) -> CalibrationModel:
    """가중치 파일을 읽는다. 파일이 없고 fallback이면 동일가중(1/3) 모델을 fallback 표시로 돌려준다."""
    if not os.path.exists(path):
        if fallback:
            logger.warning("가중치 파일 %s 없음: 동일가중(1/3)으로 대체", path)
            return equal_weights_model(EntropyComponent(component), fallback=True)
        raise DataError(ErrorCode.IO_FAILURE, f"가중치 파일이 없습니다: {path}")
    payload = read_json(path)
    if not isinstance(payload, dict) or set(payload.keys()) != set(config.WEIGHTS_FILE_KEYS):
        keys = sorted(payload.keys()) if isinstance(payload, dict) else type(payload).__name__
        raise DataError(ErrorCode.SCHEMA_MISMATCH, f"가중치 파일 키가 맞지 않습니다: {keys}")
    try:
        return CalibrationModel(
            alpha=float(payload["alpha"]),
            beta=float(payload["beta"]),
            gamma=float(payload["gamma"]),
            component=EntropyComponent(payload["component"]),
            loss=float(payload["loss"]) if payload["loss"] is not None else float("nan"),
            n_samples=int(payload["n_samples"]),
        )
    except (TypeError, ValueError) as exc:
        raise DataError(ErrorCode.SCHEMA_MISMATCH, f"가중치 파일 값 오류: {exc}") from exc


# ==========================
# 컬럼 표 연동
# ==========================
def usable_mask(frame: pd.DataFrame, component: EntropyComponent) -> pd.Series:
    component = EntropyComponent(component)
    mask = pd.Series(True, index=frame.index)
    for col in ("lambda_xi", component.value, "sigma_rho"):
        mask &= frame[col].notna()
        flag = f"flag_{col}"
        if flag in frame.columns:
            mask &= frame[flag].fillna("OK") == "OK"
    return mask


def score_frame(frame: pd.DataFrame, model: CalibrationModel) -> pd.Series:
    """행마다 S. 필요한 성분이 없는 행은 NaN."""
    mask = usable_mask(frame, model.component)
    scores = pd.Series(np.nan, index=frame.index, name="S")
    if mask.any():
        sub = frame.loc[mask]
        scores.loc[mask] = collapse_scores(sub["lambda_xi"], sub[model.component.value], sub["sigma_rho"], model.weights)
    return scores


def frame_labels(frame: pd.DataFrame) -> np.ndarray:
    return frame["level"].isin([DefensibilityLevel.L1.value, DefensibilityLevel.L2.value]).astype(int).to_numpy()


def fit_frame(frame: pd.DataFrame, component: EntropyComponent = EntropyComponent.H_W) -> CalibrationModel:
    component = EntropyComponent(component)
    mask = usable_mask(frame, component)
    excluded = int((~mask).sum())
    if excluded:
        logger.info("적합 제외 행 %d개 (성분 누락)", excluded)
    sub = frame.loc[mask]
    return fit_arrays(sub["lambda_xi"], sub[component.value], sub["sigma_rho"], frame_labels(sub), component)


def split_of(record_id: str, holdout_fraction: float = config.HOLDOUT_FRACTION) -> str:
    """id 해시로 정하는 결정적 분할."""
    digest = hashlib.sha256(str(record_id).encode("utf-8")).hexdigest()
    u = int(digest[:12], 16) / float(16 ** 12)
    return "holdout" if u < holdout_fraction else "calibration"


def split_frame(frame: pd.DataFrame, holdout_fraction: float) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """(calibration, holdout). 같은 case의 반복 감사는 같은 쪽으로 간다."""
    key = frame["case_id"] if "case_id" in frame.columns else frame["id"]
    side = key.map(lambda k: split_of(k, holdout_fraction))
    return frame.loc[side == "calibration"], frame.loc[side == "holdout"]


def held_out_ece_table(frame: pd.DataFrame, model: CalibrationModel, bins: int = config.ECE_BINS) -> pd.DataFrame:
    """온도별 held-out ECE 표. Skip은 성분 누락으로 점수를 못 낸 행."""
    rows = []
    for temperature, group in frame.groupby("temperature", sort=True):
        scores = score_frame(group, model)
        usable = scores.notna()
        y = frame_labels(group)
        s = scores[usable].to_numpy()
        yy = y[usable.to_numpy()]
        ece = compute_ece(s, yy, bins) if len(s) >= bins else float("nan")
        rows.append({
            "T": float(temperature),
            "N": int(len(group)),
            "Skip": int((~usable).sum()),
            "Extr (%)": 100.0 * float(usable.mean()) if len(group) else float("nan"),
            "ECE (prob)": ece,
            "S_all (prob)": float(s.mean()) if len(s) else float("nan"),
            "S_def (prob)": float(s[yy == 1].mean()) if (yy == 1).any() else float("nan"),
            "S_indef (prob)": float(s[yy == 0].mean()) if (yy == 0).any() else float("nan"),
            "Def (%)": 100.0 * float(yy.mean()) if len(yy) else float("nan"),
        })
    return pd.DataFrame(rows)


def model_summary(m: CalibrationModel) -> dict:
    out = asdict(m)
    out["component"] = m.component.value
    return out
