"""Candidate action enumeration over the current neighborhood and its filtration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from .actions import (
    ENTITIES,
    NO_TIME,
    ActionError,
    ActionExpr,
    AnswerLiteral,
    EntityRef,
    FinalAnswer,
    RelationRef,
    StepEnv,
    execute_action,
    render_action,
    similarity_text,
)
from .embedding import Embedder, cosine_similarity, default_embedder
from .temporal import Timestamp, sorted_unique
from .tkg import INCOMING, OUTGOING, TemporalKG

DEFAULT_TOP_K = 20
SCORE_DIGITS = 12


@dataclass(frozen=True)
class Candidate:
    action: ActionExpr
    score: Optional[float]  # None when presented unfiltered
    result_size: Optional[int]

    @property
    def text(self) -> str:
        return render_action(self.action)


@dataclass(frozen=True)
class CandidateSet:
    step: int
    candidates: Tuple[Candidate, ...] = ()
    filtered: bool = True

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def texts(self) -> List[str]:
        return [c.text for c in self.candidates]

    def actions(self) -> List[ActionExpr]:
        return [c.action for c in self.candidates]


def enumerate_candidates(
    kg: TemporalKG,
    env: StepEnv,
    anchors: Iterable[str],
    question_times: Sequence[Timestamp] = (),
) -> List[ActionExpr]:
    """Build the raw candidate pool from each anchor's one-hop neighborhood.

    Entity queries come per incident edge; with a non-empty current result,
    list operators are instantiated with question and result timestamps and
    answer actions for the top item are added. Order is deterministic,
    duplicates (by canonical text) are dropped.
    """
    out: List[ActionExpr] = []
    seen = set()

    def emit(a: ActionExpr) -> None:
        key = render_action(a)
        if key not in seen:
            seen.add(key)
            out.append(a)

    qtimes = sorted_unique(question_times)
    for e in sorted(set(anchors)):
        sub = kg.one_hop_subgraph(e)
        for neighbor, rel, direction in sub.pairs:
            if direction == OUTGOING:
                emit(ActionExpr("getTailEntity", (EntityRef(e), RelationRef(rel), NO_TIME)))
                for t in qtimes:
                    emit(ActionExpr("getTailEntity", (EntityRef(e), RelationRef(rel), t)))
                emit(ActionExpr("getTime", (EntityRef(e), RelationRef(rel), EntityRef(neighbor))))
            elif direction == INCOMING:
                emit(ActionExpr("getHeadEntity", (EntityRef(e), RelationRef(rel), NO_TIME)))
                for t in qtimes:
                    emit(ActionExpr("getHeadEntity", (EntityRef(e), RelationRef(rel), t)))
                emit(ActionExpr("getTime", (EntityRef(neighbor), RelationRef(rel), EntityRef(e))))

    if env.current:
        emit(ActionExpr("getFirst", (ENTITIES,)))
        emit(ActionExpr("getLast", (ENTITIES,)))
        stamps = sorted_unique(list(qtimes) + env.current.times())
        for t in stamps:
            emit(ActionExpr("getBefore", (ENTITIES, t)))
            emit(ActionExpr("getAfter", (ENTITIES, t)))
        for i, lo in enumerate(stamps):
            for hi in stamps[i:]:
                emit(ActionExpr("getBetween", (ENTITIES, lo, hi)))
        top_entity, top_time = env.current.items[0]
        emit(ActionExpr("answer", (AnswerLiteral(top_entity),)))
        emit(ActionExpr("answer", (top_time,)))
    return out


def _trial(a: ActionExpr, kg: TemporalKG, env: StepEnv) -> int:
    """Result size of ``a`` on a sandboxed env copy; 0 for empty or failing actions."""
    try:
        res = execute_action(a, kg, env.copy())
    except ActionError:
        return 0
    if isinstance(res, FinalAnswer):
        return max(len(res.items), 1)
    return len(res)


def filter_candidates(
    cands: Sequence[ActionExpr],
    question: str,
    kg: TemporalKG,
    env: StepEnv,
    k: int = DEFAULT_TOP_K,
    embedder: Optional[Embedder] = None,
    step: int = 0,
) -> CandidateSet:
    """Keep feasible candidates, rank by similarity to the question, cap at ``k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    embedder = embedder or default_embedder()
    qv = embedder.embed(question)
    scored = []
    seen = set()
    for a in cands:
        text = render_action(a)
        if text in seen:
            continue
        seen.add(text)
        size = _trial(a, kg, env)
        if size == 0:
            continue
        # rounding absorbs float noise so mathematically tied scores fall back to text order
        score = round(cosine_similarity(qv, embedder.embed(similarity_text(a))), SCORE_DIGITS)
        scored.append(Candidate(a, score, size))
    scored.sort(key=lambda c: (-c.score, c.text))
    return CandidateSet(step=step, candidates=tuple(scored[:k]), filtered=True)


def unfiltered_candidates(cands: Sequence[ActionExpr], step: int = 0) -> CandidateSet:
    """Every enumerated action in enumeration order, unscored and uncapped."""
    return CandidateSet(step=step, candidates=tuple(Candidate(a, None, None) for a in cands), filtered=False)
