# -*- coding: utf-8 -*-
"""합성 감사 데이터 생성기.

트레이스는 κ → ω → ι → ξ 순서로 표본추출하고, 뽑은 분포를 그대로 top_candidates에 기록한다.
따라서 추출기가 돌려주는 PDS는 생성 시점의 분포와 일치한다.

난수 흐름 (모두 SeedSequence에서 파생)
• [seed, 0]                      : 함대 구성(코호트, 케이스, 행동)
• [seed, 1, sha(community)]      : 커뮤니티 규칙 집합
• [seed, 2, case.index]          : 케이스 고정 지터(κ 위치별 간격, ι 오프셋, 위조 단어)
• [seed, 3, case.index, T·1000]  : (케이스, 온도)별 반복 K회, 순차 추출
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import entr, expit, log_softmax, logsumexp, softmax
from scipy.stats import entropy

import config
from data.loader import save_frame, write_records, write_rule_sets
from data.preprocess import COMPONENTS, ExtractionStatus, PdsVector
from data.records import (
    AuditRecord,
    DefensibilityLevel,
    InverseCheck,
    PrecedentWeight,
    ProposedAction,
    RuleBlock,
    RuleSet,
    TokenCandidate,
    TokenEvent,
)
from insight.calibration import collapse_scores
from util.errors import DataError, ErrorCode

logger = logging.getLogger(__name__)

FABRICATED = "FABRICATED"

LEVELS = (DefensibilityLevel.L1, DefensibilityLevel.L2, DefensibilityLevel.L3)
WEIGHTS = (PrecedentWeight.HIGH, PrecedentWeight.MEDIUM, PrecedentWeight.LOW)

# ω 로짓 (High, Medium, Low): 레벨에만 의존
OMEGA_LOGITS = {
    DefensibilityLevel.L1: (2.0, 0.0, -1.0),
    DefensibilityLevel.L2: (0.2, 0.6, 0.2),
    DefensibilityLevel.L3: (1.5, 0.0, -0.5),
}
IOTA_SHIFT = 2.0
IOTA_LEVEL_OFFSET = {DefensibilityLevel.L1: -0.5, DefensibilityLevel.L2: 0.0, DefensibilityLevel.L3: 0.5}
XI_PRIMARY_PEAK = 3.0
XI_ALTERNATIVE = {
    DefensibilityLevel.L1: (0.0, 0.5, 1.5),
    DefensibilityLevel.L2: (0.0, 0.5, 1.5),
    DefensibilityLevel.L3: (0.0, 1.5, 0.5),
}
XI_YES_BUMP = 0.3
KAPPA_GAP_BASE = 0.5
KAPPA_GAP_SCALE = 6.0
KAPPA_JITTER_SIGMA = 0.25
ALT_READING_SCALE = 0.5
NOISE_READING_LOGIT = -0.4

LOGIC_CHAIN = "The post was compared against the cited rule and the closest precedent."

RULE_VOCAB = (
    "spam", "harassment", "personal", "information", "doxxing", "self", "promotion", "links",
    "civil", "discussion", "respect", "members", "posts", "must", "be", "relevant", "topic",
    "hate", "speech", "threats", "violence", "misinformation", "medical", "claims", "sources",
    "required", "titles", "descriptive", "reposts", "allowed", "memes", "weekend", "only",
    "advertising", "prohibited", "moderators", "remove", "content", "violates", "community",
    "standards", "brigading", "vote", "manipulation", "impersonation", "accounts", "nsfw",
    "marked", "graphic", "trolling", "bait", "english", "language", "flair", "account", "age",
    "minimum", "karma", "politics", "off",
)
FILLER_VOCAB = ("context", "arguably", "suggests", "reasonable", "interpretation", "overall", "generally", "intent")
_SYLLABLE_HEADS = ("zor", "quix", "vel", "brak", "thun", "mip", "glo", "fen")
_SYLLABLE_TAILS = ("ath", "ix", "umb", "orr", "esk")
FABRICATED_VOCAB = tuple(h + t for h in _SYLLABLE_HEADS for t in _SYLLABLE_TAILS)


class Hypothesis(str, Enum):
    H_G = "H_G"  # 케이스 고유의 거버넌스 모호성
    H_N = "H_N"  # 표본추출 잡음


class LabelMode(str, Enum):
    CALIBRATED = "calibrated"
    TOKEN = "token"


class Adversarial(str, Enum):
    CLEAN = "clean"
    ACTION_FLIP = "action-flip"
    HALLUCINATED = "hallucinated"


@dataclass(frozen=True)
class CaseSpec:
    case_id: str
    ambiguity: float
    true_level: DefensibilityLevel
    citation_source: str
    community_id: str
    index: int = 0
    adversarial: Adversarial = Adversarial.CLEAN
    archetype: str = ""
    group: Optional[str] = None

    def __post_init__(self):
        if not 0.0 <= self.ambiguity <= 1.0:
            raise DataError(ErrorCode.INVALID_VALUE, f"{self.case_id}: ambiguity는 [0, 1]: {self.ambiguity}")
        if (
            self.citation_source == FABRICATED
            and self.true_level is not DefensibilityLevel.L3
            and self.adversarial is Adversarial.CLEAN
        ):
            raise DataError(ErrorCode.INVALID_VALUE, f"{self.case_id}: 위조 인용은 L3 또는 공격 케이스만 가능합니다")


@dataclass(frozen=True)
class SimConfig:
    temperature: float = config.SIM_TEMPERATURE
    replicates: int = 1
    hypothesis: Hypothesis = Hypothesis.H_G
    seed: int = 0
    n_cohorts: int = config.SIM_N_COHORTS
    cohort_size: Tuple[int, int] = config.SIM_COHORT_SIZE
    low_ambiguity: Tuple[float, float] = (0.02, 0.15)
    high_ambiguity: Tuple[float, float] = (0.4, 0.8)
    adversarial_fraction: float = 0.0
    true_weights: Tuple[float, float, float] = config.SIM_TRUE_WEIGHTS
    label_mode: LabelMode = LabelMode.CALIBRATED
    citation_tokens: int = config.SIM_CITATION_TOKENS
    logit_jitter: float = config.SIM_LOGIT_JITTER

    def __post_init__(self):
        if not self.temperature > 0:
            raise DataError(ErrorCode.INVALID_VALUE, f"temperature는 양수여야 합니다: {self.temperature}")
        if self.replicates < 1:
            raise DataError(ErrorCode.INVALID_VALUE, f"replicates는 1 이상: {self.replicates}")
        if not 0.0 <= self.adversarial_fraction <= 1.0:
            raise DataError(ErrorCode.INVALID_VALUE, f"adversarial_fraction은 [0, 1]: {self.adversarial_fraction}")
        if self.n_cohorts < 1 or self.cohort_size[0] < 1 or self.cohort_size[0] > self.cohort_size[1]:
            raise DataError(ErrorCode.INVALID_VALUE, "코호트 수와 크기 범위가 올바르지 않습니다")
        if self.citation_tokens < 1:
            raise DataError(ErrorCode.INVALID_VALUE, "citation_tokens는 1 이상")
        if self.seed < 0:
            raise DataError(ErrorCode.INVALID_VALUE, f"seed는 0 이상: {self.seed}")
        object.__setattr__(self, "hypothesis", Hypothesis(self.hypothesis))
        object.__setattr__(self, "label_mode", LabelMode(self.label_mode))


def _stream(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def _text_key(text: str) -> int:
    return int(hashlib.sha256(text.encode("utf-8")).hexdigest()[:8], 16)


def _temperature_key(temperature: float) -> int:
    return int(round(temperature * 1000))


# ==========================
# 규칙 집합
# ==========================
PLATFORM_COMMUNITY = "platform"


def _rule_body(rng: np.random.Generator, n_words: int = 30) -> str:
    return " ".join(RULE_VOCAB[i] for i in rng.integers(0, len(RULE_VOCAB), size=n_words))


@lru_cache(maxsize=1024)
def community_rule_set(community_id: str, seed: int) -> RuleSet:
    """플랫폼 규칙 2개(전 커뮤니티 공통) + 커뮤니티 규칙 3개 + 선례 1개."""
    platform_rng = _stream(seed, 1, _text_key(PLATFORM_COMMUNITY))
    rng = _stream(seed, 1, _text_key(community_id))
    return RuleSet(
        community_id=community_id,
        platform_rules=tuple(RuleBlock(f"{PLATFORM_COMMUNITY}/P{k}", _rule_body(platform_rng)) for k in (1, 2)),
        community_rules=tuple(RuleBlock(f"{community_id}/C{k}", _rule_body(rng)) for k in (1, 2, 3)),
        precedents=(RuleBlock(f"{community_id}/K1", _rule_body(rng)),),
    )


def _rule_body_for(spec: CaseSpec, seed: int) -> str:
    for block in community_rule_set(spec.community_id, seed).blocks:
        if block.rule_id == spec.citation_source:
            return block.body
    raise DataError(ErrorCode.INVALID_VALUE, f"{spec.case_id}: 규칙 {spec.citation_source}가 없습니다")


# ==========================
# 반복 추출
# ==========================
@dataclass(frozen=True)
class CaseJitter:
    kappa: np.ndarray
    iota: float
    primary_words: Tuple[str, ...]
    alternative_words: Tuple[str, ...]


def case_jitter(spec: CaseSpec, cfg: SimConfig) -> CaseJitter:
    rng = _stream(cfg.seed, 2, spec.index)
    L = cfg.citation_tokens
    kappa = rng.lognormal(0.0, KAPPA_JITTER_SIGMA, size=L)
    iota = float(rng.normal(0.0, cfg.logit_jitter))
    if spec.citation_source == FABRICATED:
        picks = rng.integers(0, len(FABRICATED_VOCAB), size=2 * L)
        words = [FABRICATED_VOCAB[i] for i in picks]
        return CaseJitter(kappa, iota, tuple(words[:L]), tuple(words[L:]))
    body = _rule_body_for(spec, cfg.seed).split()
    primary = [body[j % len(body)] for j in range(L)]
    alternative = [body[(j + 1) % len(body)] for j in range(L)]
    if spec.archetype == "POLICY_PENUMBRA":
        for j in range(3, L, 4):
            primary[j] = FILLER_VOCAB[j % len(FILLER_VOCAB)]
            alternative[j] = FILLER_VOCAB[(j + 1) % len(FILLER_VOCAB)]
    return CaseJitter(kappa, iota, tuple(primary), tuple(alternative))


def alternative_probability(spec: CaseSpec, cfg: SimConfig, temperature: float) -> float:
    """대안 해석을 고를 확률. H_G는 온도와 무관, H_N은 케이스와 무관."""
    if cfg.hypothesis is Hypothesis.H_G:
        return ALT_READING_SCALE * spec.ambiguity
    return float(expit(NOISE_READING_LOGIT / temperature))


def kappa_gaps(spec: CaseSpec, cfg: SimConfig, jitter: CaseJitter, temperature: float) -> np.ndarray:
    if cfg.hypothesis is Hypothesis.H_G:
        base = KAPPA_GAP_BASE + KAPPA_GAP_SCALE * (1.0 - spec.ambiguity)
    else:
        base = KAPPA_GAP_BASE + KAPPA_GAP_SCALE * 0.5
    return base * jitter.kappa / temperature


@dataclass
class ReplicateBatch:
    """한 케이스의 한 온도에서 뽑은 K개 반복. 로짓은 모두 온도로 나눈 값."""
    spec: CaseSpec
    temperature: float
    jitter: CaseJitter
    alternative: np.ndarray
    kappa_gaps: np.ndarray
    kappa_alt: np.ndarray
    omega_logits: np.ndarray
    weight_idx: np.ndarray
    iota_logits: np.ndarray
    inverse_yes: np.ndarray
    xi_logits: np.ndarray
    level_idx: np.ndarray
    lambda_xi: np.ndarray = field(init=False)
    map_idx: np.ndarray = field(init=False)
    h_kappa: float = field(init=False)
    h_w: float = field(init=False)
    sigma_rho: np.ndarray = field(init=False)

    def __post_init__(self):
        lp = log_softmax(self.xi_logits, axis=1)
        self.map_idx = np.argmax(lp, axis=1)
        best = lp[np.arange(len(lp)), self.map_idx]
        self.lambda_xi = np.minimum(best - logsumexp(lp, axis=1), 0.0)
        self.h_kappa = float(np.mean((entr(expit(self.kappa_gaps)) + entr(expit(-self.kappa_gaps))) / np.log(2.0)))
        self.h_w = float(entropy(softmax(self.omega_logits), base=2))
        self.sigma_rho = expit(self.iota_logits)

    @property
    def K(self) -> int:
        return len(self.level_idx)

    def level(self, i: int) -> DefensibilityLevel:
        return LEVELS[int(self.level_idx[i])]

    def inverse_check(self, i: int) -> InverseCheck:
        return InverseCheck.YES if self.inverse_yes[i] else InverseCheck.NO

    def pds(self, i: int) -> PdsVector:
        return PdsVector(
            lambda_xi=float(self.lambda_xi[i]),
            h_kappa=self.h_kappa,
            h_w=self.h_w,
            sigma_rho=float(self.sigma_rho[i]),
            map_level=LEVELS[int(self.map_idx[i])],
            extraction_flags={c: ExtractionStatus.OK for c in COMPONENTS},
        )

    def scores(self, weights: Sequence[float]) -> np.ndarray:
        return collapse_scores(self.lambda_xi, np.full(self.K, self.h_w), self.sigma_rho, weights)


def _sample_rows(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """행마다 범주 하나. 역누적분포 방식."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(len(probs))
    return np.minimum((u[:, None] > cdf).sum(axis=1), probs.shape[1] - 1)


def sample_batch(
    spec: CaseSpec,
    cfg: SimConfig,
    temperature: Optional[float] = None,
    K: Optional[int] = None,
) -> ReplicateBatch:
    T = cfg.temperature if temperature is None else temperature
    K = cfg.replicates if K is None else K
    if not T > 0 or K < 1:
        raise DataError(ErrorCode.INVALID_VALUE, f"T={T}, K={K}")
    jitter = case_jitter(spec, cfg)
    rng = _stream(cfg.seed, 3, spec.index, _temperature_key(T))
    level = spec.true_level
    L = cfg.citation_tokens

    # κ
    alternative = rng.random(K) < alternative_probability(spec, cfg, T)
    gaps = kappa_gaps(spec, cfg, jitter, T)
    kappa_alt = rng.random((K, L)) < expit(-gaps)[None, :]

    # ω
    omega = np.asarray(OMEGA_LOGITS[level], dtype=float) / T
    weight_idx = rng.choice(3, size=K, p=softmax(omega))

    # ι
    sign = np.where(alternative, 1.0, -1.0)
    iota = (IOTA_SHIFT * sign + IOTA_LEVEL_OFFSET[level] + jitter.iota) / T
    inverse_yes = rng.random(K) < expit(iota)

    # ξ
    primary = np.zeros(3)
    primary[level.index - 1] = XI_PRIMARY_PEAK
    xi = np.where(alternative[:, None], np.asarray(XI_ALTERNATIVE[level])[None, :], primary[None, :])
    xi[:, 2] += np.where(inverse_yes, XI_YES_BUMP, 0.0)
    xi /= T
    probs = softmax(xi, axis=1)

    if cfg.label_mode is LabelMode.TOKEN:
        level_idx = _sample_rows(rng, probs)
    else:
        lp = log_softmax(xi, axis=1)
        lam = np.minimum(lp.max(axis=1) - logsumexp(lp, axis=1), 0.0)
        h_w = float(entropy(softmax(omega), base=2))
        s_true = collapse_scores(lam, np.full(K, h_w), expit(iota), cfg.true_weights)
        defensible = rng.random(K) < s_true
        # 방어가능 여부를 먼저 뽑고 그 쪽 레벨 안에서 기록 분포로 다시 뽑는다
        excluded = np.where(defensible[:, None], np.array([False, False, True]), np.array([True, True, False]))
        level_idx = _sample_rows(rng, softmax(np.where(excluded, -np.inf, xi), axis=1))

    return ReplicateBatch(
        spec=spec,
        temperature=T,
        jitter=jitter,
        alternative=alternative,
        kappa_gaps=gaps,
        kappa_alt=kappa_alt,
        omega_logits=omega,
        weight_idx=weight_idx,
        iota_logits=iota,
        inverse_yes=inverse_yes,
        xi_logits=xi,
        level_idx=level_idx,
    )


# ==========================
# 레코드 렌더링
# ==========================
def _candidates(texts: Sequence[str], logits: Sequence[float]) -> Tuple[TokenCandidate, ...]:
    lps = log_softmax(np.asarray(logits, dtype=float))
    pairs = sorted(zip(texts, lps), key=lambda p: -p[1])
    return tuple(TokenCandidate(t, float(min(lp, 0.0))) for t, lp in pairs)


def _chosen(candidates: Tuple[TokenCandidate, ...], text: str) -> float:
    return next(c.logprob for c in candidates if c.token == text)


def record_id_for(case_id: str, temperature: float, k: int) -> str:
    return f"{case_id}-T{_temperature_key(temperature):04d}-k{k:04d}"


def render_record(
    batch: ReplicateBatch,
    i: int,
    proposed_action: ProposedAction,
    human_action: Optional[ProposedAction],
    record_id: Optional[str] = None,
) -> AuditRecord:
    """i번째 반복을 토큰 단위 레코드로. 조각을 이어 붙인 문자열이 곧 trace_text다."""
    spec = batch.spec
    pieces: List[Tuple[str, float, Tuple[TokenCandidate, ...]]] = []
    pieces.append(('{"logic_chain": ' + json.dumps(LOGIC_CHAIN) + ', "policy_citation": "', 0.0, ()))
    for j, gap in enumerate(batch.kappa_gaps):
        lead = " " if j else ""
        texts = (lead + batch.jitter.primary_words[j], lead + batch.jitter.alternative_words[j])
        cands = _candidates(texts, (gap, 0.0))
        text = texts[1] if batch.kappa_alt[i, j] else texts[0]
        pieces.append((text, _chosen(cands, text), cands))
    pieces.append(('", "precedent_weight": "', 0.0, ()))
    cands = _candidates([w.value for w in WEIGHTS], batch.omega_logits)
    weight = WEIGHTS[int(batch.weight_idx[i])].value
    pieces.append((weight, _chosen(cands, weight), cands))
    pieces.append(('", "inverse_check": "', 0.0, ()))
    cands = _candidates((InverseCheck.YES.value, InverseCheck.NO.value), (batch.iota_logits[i], 0.0))
    check = batch.inverse_check(i).value
    pieces.append((check, _chosen(cands, check), cands))
    pieces.append(('", "defensibility_level": "', 0.0, ()))
    cands = _candidates(("1", "2", "3"), batch.xi_logits[i])
    digit = str(batch.level(i).index)
    pieces.append((digit, _chosen(cands, digit), cands))
    pieces.append(('"}', 0.0, ()))

    tokens = []
    offset = 0
    for text, lp, cands in pieces:
        tokens.append(TokenEvent(text, float(lp), cands, offset, offset + len(text)))
        offset += len(text)
    return AuditRecord(
        id=record_id or record_id_for(spec.case_id, batch.temperature, i),
        community_id=spec.community_id,
        content=f"synthetic post {spec.case_id}",
        proposed_action=proposed_action,
        human_action=human_action,
        trace_text="".join(p[0] for p in pieces),
        tokens=tuple(tokens),
        temperature=float(batch.temperature),
        case_id=spec.case_id,
    )


def generate_replicate(spec: CaseSpec, cfg: SimConfig, k: int = 0) -> AuditRecord:
    """설정 온도에서 k번째 반복 레코드 하나. 행동은 참 레벨로 정한다."""
    batch = sample_batch(spec, cfg, K=max(cfg.replicates, k + 1))
    action = ProposedAction.REMOVE if spec.true_level is DefensibilityLevel.L3 else ProposedAction.APPROVE
    return render_record(batch, k, action, None)


def generate_replicates(spec: CaseSpec, cfg: SimConfig, temperature: Optional[float] = None) -> List[AuditRecord]:
    batch = sample_batch(spec, cfg, temperature)
    action = ProposedAction.REMOVE if spec.true_level is DefensibilityLevel.L3 else ProposedAction.APPROVE
    return [render_record(batch, i, action, None) for i in range(batch.K)]


# ==========================
# 함대 생성
# ==========================
TRUTH_COLUMNS = [
    "record_id", "case_id", "community_id", "ambiguity", "true_level",
    "citation_source", "adversarial", "archetype", "group",
]

CLEAN_LEVEL_PROBS = (0.6, 0.3, 0.1)
ADVERSARIAL_KINDS = (("fabricated", 0.5), ("action_flip", 0.3), ("penumbra", 0.2))
P_REMOVE = 0.35
FLIPPER_AMBIGUITY = 0.3


@dataclass
class Fleet:
    records: List[AuditRecord]
    truth: pd.DataFrame
    rule_sets: List[RuleSet]
    cases: List[CaseSpec]


def _group_for(ambiguity: float) -> str:
    return "FLIPPER" if ambiguity >= FLIPPER_AMBIGUITY else "STABLE"


def _fleet_case(rng: np.random.Generator, cfg: SimConfig, cid: str, index: int, high: bool, rules: RuleSet) -> CaseSpec:
    lo, hi = cfg.high_ambiguity if high else cfg.low_ambiguity
    a = float(rng.uniform(lo, hi))
    level = LEVELS[int(rng.choice(3, p=CLEAN_LEVEL_PROBS))]
    real_ids = [b.rule_id for b in rules.blocks]
    source = real_ids[int(rng.integers(0, len(real_ids)))]
    case_id = f"{cid}-{index:05d}"
    if rng.random() >= cfg.adversarial_fraction:
        return CaseSpec(case_id, a, level, source, cid, index, Adversarial.CLEAN, "", _group_for(a))
    kind = ADVERSARIAL_KINDS[int(rng.choice(len(ADVERSARIAL_KINDS), p=[p for _, p in ADVERSARIAL_KINDS]))][0]
    low_a = float(rng.uniform(*cfg.low_ambiguity))
    if kind == "fabricated":
        return CaseSpec(case_id, low_a, DefensibilityLevel.L3, FABRICATED, cid, index,
                        Adversarial.HALLUCINATED, "LOW_ENTROPY_FABRICATION", _group_for(low_a))
    if kind == "penumbra":
        return CaseSpec(case_id, low_a, DefensibilityLevel.L2, source, cid, index,
                        Adversarial.HALLUCINATED, "POLICY_PENUMBRA", _group_for(low_a))
    return CaseSpec(case_id, a, DefensibilityLevel.L3, source, cid, index,
                    Adversarial.ACTION_FLIP, "UNCLASSIFIED", _group_for(a))


def _actions(rng: np.random.Generator, spec: CaseSpec, level: DefensibilityLevel) -> Tuple[ProposedAction, ProposedAction]:
    """(모델 제안, 사람 판정)."""
    flip = {ProposedAction.REMOVE: ProposedAction.APPROVE, ProposedAction.APPROVE: ProposedAction.REMOVE}
    if spec.archetype == "POLICY_PENUMBRA":
        return ProposedAction.APPROVE, ProposedAction.REMOVE
    human = ProposedAction.REMOVE if rng.random() < P_REMOVE else ProposedAction.APPROVE
    if spec.adversarial is Adversarial.ACTION_FLIP:
        return flip[human], human
    disagree = 0.05 + 0.4 * spec.ambiguity + (0.3 if level is DefensibilityLevel.L3 else 0.0)
    proposed = flip[human] if rng.random() < disagree else human
    return proposed, human


def generate_fleet(cfg: SimConfig) -> Fleet:
    """코호트의 절반은 저모호(low_ambiguity), 절반은 고모호(high_ambiguity)."""
    rng = _stream(cfg.seed, 0)
    records: List[AuditRecord] = []
    truth_rows: List[Dict[str, object]] = []
    rule_sets: List[RuleSet] = []
    cases: List[CaseSpec] = []
    index = 0
    for c in range(cfg.n_cohorts):
        cid = f"c{c:02d}"
        rules = community_rule_set(cid, cfg.seed)
        rule_sets.append(rules)
        size = int(rng.integers(cfg.cohort_size[0], cfg.cohort_size[1] + 1))
        high = c % 2 == 1
        for _ in range(size):
            spec = _fleet_case(rng, cfg, cid, index, high, rules)
            index += 1
            cases.append(spec)
            batch = sample_batch(spec, cfg)
            for k in range(batch.K):
                proposed, human = _actions(rng, spec, batch.level(k))
                record = render_record(batch, k, proposed, human)
                records.append(record)
                truth_rows.append({
                    "record_id": record.id,
                    "case_id": spec.case_id,
                    "community_id": cid,
                    "ambiguity": spec.ambiguity,
                    "true_level": spec.true_level.value,
                    "citation_source": spec.citation_source,
                    "adversarial": spec.adversarial.value,
                    "archetype": spec.archetype,
                    "group": spec.group,
                })
    logger.info(
        "합성 함대: 코호트 %d개, 케이스 %d개, 레코드 %d개 (가설 %s, seed=%d)",
        cfg.n_cohorts, len(cases), len(records), cfg.hypothesis.value, cfg.seed,
    )
    return Fleet(records, pd.DataFrame(truth_rows, columns=TRUTH_COLUMNS), rule_sets, cases)


def write_fleet(fleet: Fleet, out_dir: str) -> Dict[str, str]:
    """dataset.jsonl, truth.csv, rules.json."""
    paths = {
        "dataset": os.path.join(out_dir, "dataset.jsonl"),
        "truth": os.path.join(out_dir, "truth.csv"),
        "rules": os.path.join(out_dir, "rules.json"),
    }
    write_records(paths["dataset"], fleet.records)
    save_frame(paths["truth"], fleet.truth)
    write_rule_sets(paths["rules"], fleet.rule_sets)
    return paths


# ==========================
# 스윕 / 캘리브레이션 표본
# ==========================
SWEEP_COMMUNITY = "sweep"
CALIBRATION_COMMUNITY = "calibration"


def sweep_cases(
    seed: int,
    n_flippers: int = 50,
    n_stable: int = 50,
    flipper_range: Tuple[float, float] = (0.7, 1.0),
    stable_range: Tuple[float, float] = (0.1, 0.4),
) -> List[CaseSpec]:
    """두 집단은 같은 레벨 배치(L1, L2, L3 순환)를 갖고 모호성만 다르다."""
    rng = _stream(seed, 0)
    source = community_rule_set(SWEEP_COMMUNITY, seed).community_rules[0].rule_id
    specs = []
    for group, n, (lo, hi) in (("FLIPPER", n_flippers, flipper_range), ("STABLE", n_stable, stable_range)):
        for i in range(n):
            index = len(specs)
            specs.append(CaseSpec(
                case_id=f"{group.lower()}-{i:03d}",
                ambiguity=float(rng.uniform(lo, hi)),
                true_level=LEVELS[i % 3],
                citation_source=source,
                community_id=SWEEP_COMMUNITY,
                index=index,
                group=group,
            ))
    return specs


def calibration_sample(
    n: int,
    seed: int,
    true_weights: Tuple[float, float, float] = config.SIM_TRUE_WEIGHTS,
    temperature_range: Tuple[float, float] = (0.2, 2.0),
    hypothesis: Hypothesis = Hypothesis.H_G,
) -> pd.DataFrame:
    """레벨 라벨이 Bernoulli(S_true)인 컬럼 표. 추출 프레임과 같은 열을 쓴다."""
    rng = _stream(seed, 0)
    source = community_rule_set(CALIBRATION_COMMUNITY, seed).community_rules[0].rule_id
    rows = []
    for i in range(n):
        spec = CaseSpec(
            case_id=f"cal-{i:06d}",
            ambiguity=float(rng.uniform(0.0, 1.0)),
            true_level=LEVELS[int(rng.integers(0, 3))],
            citation_source=source,
            community_id=CALIBRATION_COMMUNITY,
            index=i,
        )
        T = float(rng.uniform(*temperature_range))
        cfg = SimConfig(temperature=T, seed=seed, hypothesis=hypothesis, true_weights=true_weights)
        batch = sample_batch(spec, cfg, K=1)
        v = batch.pds(0)
        rows.append({
            "id": spec.case_id,
            "case_id": spec.case_id,
            "community_id": spec.community_id,
            "temperature": T,
            "level": batch.level(0).value,
            "inverse_check": batch.inverse_check(0).value,
            "precedent_weight": WEIGHTS[int(batch.weight_idx[0])].value,
            "map_level": v.map_level.value,
            "lambda_xi": v.lambda_xi,
            "h_kappa": v.h_kappa,
            "h_w": v.h_w,
            "sigma_rho": v.sigma_rho,
            **{f"flag_{c}": ExtractionStatus.OK.value for c in COMPONENTS},
        })
    return pd.DataFrame(rows)
