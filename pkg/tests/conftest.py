# -*- coding: utf-8 -*-
import json
from typing import Optional, Sequence, Tuple

import pytest

from data.records import AuditRecord, ProposedAction, TokenCandidate, TokenEvent
from data.simulator import SimConfig, generate_fleet

Piece = Tuple[str, float, Sequence[Tuple[str, float]]]


def build_record(
    pieces: Sequence[Piece],
    record_id: str = "r1",
    community_id: str = "c00",
    proposed: ProposedAction = ProposedAction.REMOVE,
    human: Optional[ProposedAction] = None,
    temperature: float = 0.2,
    case_id: Optional[str] = None,
) -> AuditRecord:
    """(텍스트, logprob, 후보) 조각을 이어 붙여 연속 구간의 레코드를 만든다."""
    tokens = []
    offset = 0
    for text, lp, cands in pieces:
        tokens.append(TokenEvent(
            text, lp, tuple(TokenCandidate(t, c) for t, c in cands), offset, offset + len(text),
        ))
        offset += len(text)
    return AuditRecord(
        id=record_id,
        community_id=community_id,
        content="post",
        proposed_action=proposed,
        human_action=human,
        trace_text="".join(p[0] for p in pieces),
        tokens=tuple(tokens),
        temperature=temperature,
        case_id=case_id,
    )


def golden_pieces(
    citation_words=("No", " spam"),
    citation_cands=None,
    weight="High",
    weight_cands=(("High", -0.1), ("Medium", -2.5), ("Low", -4.0)),
    check="No",
    check_cands=(("No", -0.2), ("Yes", -1.7)),
    level="1",
    level_cands=(("1", -0.05), ("2", -3.2), ("3", -4.5)),
):
    """필드 순서를 지킨 평면 트레이스 조각. 구조 토큰은 후보가 없다."""
    if citation_cands is None:
        citation_cands = [((w, -0.01), (w + "x", -4.6)) for w in citation_words]
    pieces = [('{"logic_chain": ' + json.dumps("checked rule") + ', "policy_citation": "', 0.0, ())]
    for w, cands in zip(citation_words, citation_cands):
        pieces.append((w, cands[0][1] if cands else -0.01, cands))
    pieces += [
        ('", "precedent_weight": "', 0.0, ()),
        (weight, -0.1, weight_cands),
        ('", "inverse_check": "', 0.0, ()),
        (check, -0.2, check_cands),
        ('", "defensibility_level": "', 0.0, ()),
        (level, -0.05, level_cands),
        ('"}', 0.0, ()),
    ]
    return pieces


@pytest.fixture
def golden_record():
    return build_record(golden_pieces())


@pytest.fixture(scope="session")
def small_fleet():
    return generate_fleet(SimConfig(seed=3, n_cohorts=6, cohort_size=(30, 40), adversarial_fraction=0.2))
