# -*- coding: utf-8 -*-
"""반복 감사(K회)로 보는 추론 안정성: σ̂_PDS, 경계 불안정, 안정성 등급, 온도 스윕."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import rankdata

import config
from data.preprocess import PdsVector
from data.records import DefensibilityLevel, InverseCheck
from util.errors import DataError, ErrorCode

logger = logging.getLogger(__name__)


class StabilityClass(str, Enum):
    ROCK_SOLID = "ROCK_SOLID"
    MOSTLY_STABLE = "MOSTLY_STABLE"
    MODERATE = "MODERATE"
    HIGHLY_UNSTABLE = "HIGHLY_UNSTABLE"


class CaseGroup(str, Enum):
    FLIPPER = "FLIPPER"
    STABLE = "STABLE"


class FlatnessVerdict(str, Enum):
    FLAT = "FLAT"
    CONVERGING = "CONVERGING"
    DRIFTING = "DRIFTING"


@dataclass(frozen=True)
class Replicate:
    pds: Optional[PdsVector]
    score: float
    level: DefensibilityLevel
    inverse_check: InverseCheck


@dataclass(frozen=True)
class ReplicateSet:
    case_id: str
    temperature: float
    replicates: Tuple[Replicate, ...]

    @property
    def K(self) -> int:
        return len(self.replicates)

    @property
    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.replicates], dtype=float)


@dataclass(frozen=True)
class StabilityProfile:
    sigma_pds: float
    p_l3: float
    dominant_level: DefensibilityLevel
    dominant_fraction: float
    boundary_unstable: bool
    stability_class: StabilityClass


@dataclass(frozen=True)
class FlatnessSummary:
    range: float
    slope: float
    approaches_one: bool
    verdict: FlatnessVerdict


def sigma_pds(scores: Sequence[float]) -> float:
    """반복 S의 표본표준편차(K−1 분모). 평균을 먼저 구하는 2-pass."""
    s = np.asarray(scores, dtype=float)
    if len(s) < 2:
        raise DataError(ErrorCode.TOO_FEW_REPLICATES, f"K={len(s)} < 2")
    mean = s.mean()
    return float(np.sqrt(np.sum((s - mean) ** 2) / (len(s) - 1)))


def classify_stability(dominant_fraction: float) -> StabilityClass:
    for bound, name in config.STABILITY_CLASS_BOUNDS:
        if dominant_fraction >= bound:
            return StabilityClass(name)
    return StabilityClass.HIGHLY_UNSTABLE


def is_boundary_unstable(p_l3: float) -> bool:
    low, high = config.BOUNDARY_P_L3
    return low < p_l3 < high


def stability_profile(rs: ReplicateSet) -> StabilityProfile:
    if rs.K < 2:
        raise DataError(ErrorCode.TOO_FEW_REPLICATES, f"{rs.case_id}: K={rs.K} < 2")
    counts = Counter(r.level for r in rs.replicates)
    dominant = None
    top = -1
    for level in DefensibilityLevel:
        if counts[level] > top:
            dominant, top = level, counts[level]
    fraction = top / rs.K
    p_l3 = counts[DefensibilityLevel.L3] / rs.K
    return StabilityProfile(
        sigma_pds=sigma_pds(rs.scores),
        p_l3=p_l3,
        dominant_level=dominant,
        dominant_fraction=fraction,
        boundary_unstable=is_boundary_unstable(p_l3),
        stability_class=classify_stability(fraction),
    )


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """평균 순위(동률은 평균)로 매긴 뒤의 Pearson 상관."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise DataError(ErrorCode.LENGTH_MISMATCH, f"길이 불일치 {len(x)} != {len(y)}")
    if len(x) < 3:
        raise DataError(ErrorCode.TOO_FEW_SAMPLES, f"표본 {len(x)}개 < 3")
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise DataError(ErrorCode.ZERO_VARIANCE, "순위 분산이 0입니다")
    rho = float(np.dot(dx, dy)) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, rho)))


def group_ratio(
    profiles: Mapping[str, StabilityProfile],
    groups: Mapping[str, CaseGroup],
) -> float:
    """Flipper 평균 σ̂ ÷ Stable 평균 σ̂."""
    flippers = [p.sigma_pds for cid, p in profiles.items() if groups.get(cid) is CaseGroup.FLIPPER]
    stable = [p.sigma_pds for cid, p in profiles.items() if groups.get(cid) is CaseGroup.STABLE]
    return sigma_ratio(flippers, stable)


def sigma_ratio(flipper_sigmas: Sequence[float], stable_sigmas: Sequence[float]) -> float:
    if len(flipper_sigmas) == 0 or len(stable_sigmas) == 0:
        raise DataError(ErrorCode.EMPTY_GROUP, "Flipper 또는 Stable 집단이 비었습니다")
    denominator = float(np.mean(stable_sigmas))
    if denominator == 0.0:
        raise DataError(ErrorCode.ZERO_DENOMINATOR, "Stable 집단의 평균 σ̂가 0입니다")
    return float(np.mean(flipper_sigmas)) / denominator


def ratio_flatness_test(ratios: Mapping[float, float], bound: float = config.FLATNESS_BOUND) -> FlatnessSummary:
    """온도별 비율의 범위와 추세. 범위가 bound 이하면 FLAT."""
    if len(ratios) < 2:
        raise DataError(ErrorCode.TOO_FEW_SAMPLES, "온도가 2개 이상 필요합니다")
    temps = np.array(sorted(ratios), dtype=float)
    values = np.array([ratios[t] for t in sorted(ratios)], dtype=float)
    spread = float(values.max() - values.min())
    slope = float(np.polyfit(temps, values, 1)[0]) if len(set(temps)) > 1 else 0.0
    approaches_one = abs(values[-1] - 1.0) < abs(values[0] - 1.0)
    if spread <= bound:
        verdict = FlatnessVerdict.FLAT
    elif approaches_one:
        verdict = FlatnessVerdict.CONVERGING
    else:
        verdict = FlatnessVerdict.DRIFTING
    return FlatnessSummary(range=spread, slope=slope, approaches_one=bool(approaches_one), verdict=verdict)


# ==========================
# 표 연동
# ==========================
def replicate_sets_from_frame(frame: pd.DataFrame, score_column: str = "S") -> List[ReplicateSet]:
    """(case_id, temperature)별 반복 묶음. 점수가 없는 행은 제외."""
    usable = frame[frame[score_column].notna()]
    sets = []
    for (case_id, temperature), group in usable.groupby(["case_id", "temperature"], sort=True):
        reps = tuple(
            Replicate(None, float(row[score_column]), DefensibilityLevel(row["level"]), InverseCheck(row["inverse_check"]))
            for _, row in group.iterrows()
        )
        sets.append(ReplicateSet(str(case_id), float(temperature), reps))
    return sets


def assign_groups(profiles: Mapping[str, StabilityProfile]) -> Dict[str, CaseGroup]:
    """정답 집단이 없을 때: 기준 온도에서 경계 불안정이면 Flipper."""
    return {
        cid: CaseGroup.FLIPPER if p.boundary_unstable else CaseGroup.STABLE
        for cid, p in profiles.items()
    }


@dataclass
class SweepCase:
    case_id: str
    temperature: float
    profile: StabilityProfile
    mean_h_kappa: float = float("nan")
    n_defensible: int = 0
    K: int = 0


def _flip_rate(cases: Sequence[SweepCase]) -> float:
    return float(np.mean([c.profile.boundary_unstable for c in cases])) if cases else float("nan")


def temperature_sweep_table(
    cases: Sequence[SweepCase],
    groups: Mapping[str, CaseGroup],
) -> pd.DataFrame:
    """지표 행 × 온도 열 배치의 스윕 표."""
    temps = sorted({c.temperature for c in cases})
    by_t = {t: [c for c in cases if c.temperature == t] for t in temps}
    reference = {c.case_id: c.mean_h_kappa for c in by_t[temps[0]]} if temps else {}

    metric_rows: Dict[str, List[float]] = {name: [] for name in (
        "Mean sigma_hat (all)",
        "Mean sigma_hat (Stable)",
        "Mean sigma_hat (Flippers)",
        "sigma_hat ratio (Flippers/Stable)",
        "Boundary flip rate, interval def. (Stable, %)",
        "Boundary flip rate, interval def. (Flippers, %)",
        "H[kappa] rank corr. with lowest T",
        "Aggregate DI (%)",
        "Rock solid (%)",
        "Highly unstable (%)",
    )}
    for t in temps:
        row_cases = by_t[t]
        stable = [c for c in row_cases if groups.get(c.case_id) is CaseGroup.STABLE]
        flippers = [c for c in row_cases if groups.get(c.case_id) is CaseGroup.FLIPPER]
        sig_all = [c.profile.sigma_pds for c in row_cases]
        sig_s = [c.profile.sigma_pds for c in stable]
        sig_f = [c.profile.sigma_pds for c in flippers]
        try:
            ratio = sigma_ratio(sig_f, sig_s)
        except DataError:
            ratio = float("nan")
        ids = [c.case_id for c in row_cases if c.case_id in reference]
        try:
            corr = spearman([reference[i] for i in ids], [c.mean_h_kappa for c in row_cases if c.case_id in reference])
        except DataError:
            corr = float("nan")
        total_k = sum(c.K for c in row_cases)
        metric_rows["Mean sigma_hat (all)"].append(float(np.mean(sig_all)) if sig_all else float("nan"))
        metric_rows["Mean sigma_hat (Stable)"].append(float(np.mean(sig_s)) if sig_s else float("nan"))
        metric_rows["Mean sigma_hat (Flippers)"].append(float(np.mean(sig_f)) if sig_f else float("nan"))
        metric_rows["sigma_hat ratio (Flippers/Stable)"].append(ratio)
        metric_rows["Boundary flip rate, interval def. (Stable, %)"].append(100.0 * _flip_rate(stable))
        metric_rows["Boundary flip rate, interval def. (Flippers, %)"].append(100.0 * _flip_rate(flippers))
        metric_rows["H[kappa] rank corr. with lowest T"].append(corr)
        metric_rows["Aggregate DI (%)"].append(
            100.0 * sum(c.n_defensible for c in row_cases) / total_k if total_k else float("nan")
        )
        metric_rows["Rock solid (%)"].append(
            100.0 * float(np.mean([c.profile.stability_class is StabilityClass.ROCK_SOLID for c in row_cases]))
        )
        metric_rows["Highly unstable (%)"].append(
            100.0 * float(np.mean([c.profile.stability_class is StabilityClass.HIGHLY_UNSTABLE for c in row_cases]))
        )

    data = {"Metric": list(metric_rows.keys())}
    for i, t in enumerate(temps):
        data[f"T={t:g}"] = [values[i] for values in metric_rows.values()]
    return pd.DataFrame(data)


def sweep_cases_from_frame(frame: pd.DataFrame, score_column: str = "S") -> List[SweepCase]:
    out = []
    h = frame.groupby(["case_id", "temperature"])["h_kappa"].mean() if "h_kappa" in frame.columns else None
    for rs in replicate_sets_from_frame(frame, score_column):
        if rs.K < 2:
            logger.warning("case %s (T=%g): 반복 %d회라 건너뜀", rs.case_id, rs.temperature, rs.K)
            continue
        out.append(SweepCase(
            case_id=rs.case_id,
            temperature=rs.temperature,
            profile=stability_profile(rs),
            mean_h_kappa=float(h.loc[(rs.case_id, rs.temperature)]) if h is not None else float("nan"),
            n_defensible=sum(1 for r in rs.replicates if r.level.is_defensible),
            K=rs.K,
        ))
    return out


def profile_table(cases: Sequence[SweepCase], groups: Optional[Mapping[str, CaseGroup]] = None) -> pd.DataFrame:
    return pd.DataFrame([
        {
            "case_id": c.case_id,
            "T": c.temperature,
            "group": groups[c.case_id].value if groups and c.case_id in groups else None,
            "K": c.K,
            "sigma_pds (prob)": c.profile.sigma_pds,
            "p_l3 (prob)": c.profile.p_l3,
            "dominant_level": c.profile.dominant_level.value,
            "dominant_fraction (prob)": c.profile.dominant_fraction,
            "boundary_unstable": c.profile.boundary_unstable,
            "stability_class": c.profile.stability_class.value,
            "mean_h_kappa (bits)": c.mean_h_kappa,
        }
        for c in cases
    ])


def ratios_by_temperature(cases: Sequence[SweepCase], groups: Mapping[str, CaseGroup]) -> Dict[float, float]:
    out = {}
    for t in sorted({c.temperature for c in cases}):
        at_t = [c for c in cases if c.temperature == t]
        out[t] = sigma_ratio(
            [c.profile.sigma_pds for c in at_t if groups.get(c.case_id) is CaseGroup.FLIPPER],
            [c.profile.sigma_pds for c in at_t if groups.get(c.case_id) is CaseGroup.STABLE],
        )
    return out


# ==========================
# 시뮬레이터 연동 (빠른 경로)
# ==========================
def replicate_set_from_batch(batch, weights: Sequence[float]) -> ReplicateSet:
    scores = batch.scores(weights)
    reps = tuple(
        Replicate(batch.pds(i), float(scores[i]), batch.level(i), batch.inverse_check(i))
        for i in range(batch.K)
    )
    return ReplicateSet(batch.spec.case_id, float(batch.temperature), reps)


def simulated_sweep(
    specs,
    cfg,
    temperatures: Sequence[float] = tuple(config.SWEEP_TEMPERATURES),
    weights: Optional[Sequence[float]] = None,
) -> Tuple[List[SweepCase], Dict[str, CaseGroup]]:
    """케이스 × 온도마다 K회 반복을 뽑아 안정성 프로파일을 만든다. 레코드는 만들지 않는다."""
    from data.simulator import sample_batch

    weights = cfg.true_weights if weights is None else weights
    cases = []
    for T in temperatures:
        for spec in specs:
            batch = sample_batch(spec, cfg, temperature=T)
            rs = replicate_set_from_batch(batch, weights)
            cases.append(SweepCase(
                case_id=spec.case_id,
                temperature=float(T),
                profile=stability_profile(rs),
                mean_h_kappa=batch.h_kappa,
                n_defensible=sum(1 for r in rs.replicates if r.level.is_defensible),
                K=rs.K,
            ))
        logger.info("스윕 T=%g: 케이스 %d개, 반복 %d회", T, len(specs), cfg.replicates)
    groups = {s.case_id: CaseGroup(s.group) for s in specs if s.group}
    return cases, groups


def groups_from_truth(truth: pd.DataFrame, cases: Sequence[SweepCase]) -> Dict[str, CaseGroup]:
    """정답 사이드카의 group 열을 쓰고, 없는 케이스는 최저 온도의 경계 불안정 여부로 정한다."""
    groups: Dict[str, CaseGroup] = {}
    if truth is not None and "group" in truth.columns:
        for case_id, group in truth.dropna(subset=["group"]).groupby("case_id")["group"].first().items():
            groups[str(case_id)] = CaseGroup(group)
    if cases:
        lowest = min(c.temperature for c in cases)
        fallback = assign_groups({c.case_id: c.profile for c in cases if c.temperature == lowest})
        for case_id, group in fallback.items():
            groups.setdefault(case_id, group)
    return groups
