"""The per-question agent loop: enumerate, filter, ask the model, execute."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, List, Optional, Sequence

from .actions import (
    ActionExecutionError,
    ActionExpr,
    ActionParseError,
    FinalAnswer,
    StepEnv,
    execute_action,
    parse_action,
    render_action,
)
from .candidates import DEFAULT_TOP_K, CandidateSet, enumerate_candidates, filter_candidates, unfiltered_candidates
from .embedding import Embedder, default_embedder
from .llm import ACTION_SELECTION, CompletionRequest, GatewayError
from .matching import match_answer
from .memory import Episode, EpisodeStep, MethodologyBank
from .prompts import ACTION_TEMPLATE, DEFAULT_EXAMPLES
from .temporal import Timestamp, extract_timestamps
from .tkg import TemporalKG

logger = logging.getLogger(__name__)

ANSWERED = "answered"
STEP_CAP = "step_cap_reached"
NO_CANDIDATES = "no_candidates"
PARSE_FAILURE = "parse_failure"
LLM_ERROR = "llm_error"
OUTCOMES = (ANSWERED, STEP_CAP, NO_CANDIDATES, PARSE_FAILURE, LLM_ERROR)

MAX_RANKED = 10


@dataclass(frozen=True)
class ReasonerConfig:
    max_steps: int = 5
    top_k: int = DEFAULT_TOP_K
    use_methodology: bool = True
    use_clustering: bool = True
    use_filter: bool = True
    parse_retries: int = 2
    examples: str = DEFAULT_EXAMPLES

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.parse_retries < 0:
            raise ValueError("parse_retries must be >= 0")

    @property
    def label(self) -> str:
        if not self.use_methodology:
            return "w/o Abstract Guidance"
        if not self.use_clustering:
            return "w/o History Cluster"
        if not self.use_filter:
            return "w/o Action Filter"
        return "ARI"


@dataclass
class Attempt:
    prompt: str
    response: str
    error: Optional[str] = None


@dataclass
class TraceStep:
    index: int
    candidates: List[str]
    attempts: List[Attempt] = field(default_factory=list)
    action: Optional[str] = None
    result: str = ""

    @property
    def prompt(self) -> str:
        return self.attempts[-1].prompt if self.attempts else ""

    @property
    def raw(self) -> str:
        return self.attempts[-1].response if self.attempts else ""


@dataclass
class Trace:
    question: str
    anchors: List[str]
    cluster_id: Optional[int] = None
    methodology: Optional[str] = None
    steps: List[TraceStep] = field(default_factory=list)
    outcome: str = STEP_CAP
    answer: Optional[str] = None
    ranked_answers: List[str] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def prompts(self) -> List[str]:
        return [a.prompt for s in self.steps for a in s.attempts]

    def to_record(self) -> dict:
        return asdict(self)


def build_action_prompt(
    question: str,
    methodology: Optional[str],
    history: Sequence[TraceStep],
    candidates: CandidateSet,
    feedback: Optional[str] = None,
    examples: str = DEFAULT_EXAMPLES,
) -> str:
    if not len(candidates):
        raise ValueError("cannot build a prompt without candidate actions")
    past = []
    for s in history:
        if s.action is None:
            continue
        past.append(f"Action {s.index}: {s.action}")
        past.append(f"Response {s.index}: {s.result}")
    return ACTION_TEMPLATE.format(
        examples=examples,
        question=question,
        methodology=methodology or "",
        history="\n".join(past) if past else "(none)",
        feedback=f"\nFeedback: {feedback}\n" if feedback else "",
        actions="\n".join(candidates.texts()),
    )


def parse_decision(raw: str) -> ActionExpr:
    return parse_action(raw)


def rank_answers(final: FinalAnswer, cap: int = MAX_RANKED) -> List[str]:
    """Answer literal first, then the rest of the bound result in its order."""
    if isinstance(final.value, Timestamp):
        rest = [str(t) for t in final.items.times()]
    else:
        rest = final.items.entities()
    return list(dict.fromkeys([final.literal, *rest]))[:cap]


def _choose(llm, question, methodology, steps, cset, cfg, step) -> Optional[ActionExpr]:
    menu = set(cset.texts())
    feedback = None
    for _ in range(cfg.parse_retries + 1):
        prompt = build_action_prompt(question, methodology, steps, cset, feedback, cfg.examples)
        raw = llm.complete(CompletionRequest(prompt, tag=ACTION_SELECTION))
        attempt = Attempt(prompt, raw)
        step.attempts.append(attempt)
        try:
            action = parse_decision(raw)
        except ActionParseError as exc:
            attempt.error = str(exc)
        else:
            if action.is_answer or render_action(action) in menu:
                return action
            attempt.error = f"{render_action(action)} is not one of the available actions"
        feedback = f"your previous output was rejected ({attempt.error}). Reply with one available action enclosed in $."
    return None


def answer_question(
    question: str,
    anchors: Iterable[str],
    kg: TemporalKG,
    memory: Optional[MethodologyBank],
    llm,
    cfg: ReasonerConfig = ReasonerConfig(),
    question_times: Optional[Sequence[Timestamp]] = None,
    embedder: Optional[Embedder] = None,
) -> Trace:
    embedder = embedder or (memory.embedder if memory is not None else default_embedder())
    base = sorted({kg.resolve_entity(a) for a in anchors})
    times = list(question_times) if question_times is not None else extract_timestamps(question)
    trace = Trace(question=question, anchors=base)

    if cfg.use_methodology and memory is not None:
        if cfg.use_clustering:
            trace.cluster_id, trace.methodology = memory.select(question)
        else:
            trace.methodology = memory.global_methodology
            if trace.methodology is None:
                logger.warning("no global methodology available; methodology slot left empty")

    env = StepEnv()
    pool = enumerate_candidates(kg, env, base, times)
    for t in range(cfg.max_steps):
        if cfg.use_filter:
            cset = filter_candidates(pool, question, kg, env, cfg.top_k, embedder, step=t)
        else:
            cset = unfiltered_candidates(pool, step=t)
        if not len(cset):
            trace.outcome = NO_CANDIDATES
            return trace
        step = TraceStep(index=t, candidates=cset.texts())
        trace.steps.append(step)
        try:
            action = _choose(llm, question, trace.methodology, trace.steps[:-1], cset, cfg, step)
        except GatewayError as exc:
            step.result = f"error: {exc}"
            trace.outcome = LLM_ERROR
            return trace
        if action is None:
            trace.outcome = PARSE_FAILURE
            return trace
        step.action = render_action(action)
        try:
            result = execute_action(action, kg, env)
        except ActionExecutionError as exc:
            step.result = f"error: {exc}"
        else:
            step.result = result.summary()
            if isinstance(result, FinalAnswer):
                trace.outcome = ANSWERED
                trace.answer = result.literal
                trace.ranked_answers = rank_answers(result)
                return trace
        anchors_now = sorted(set(base) | set(env.current.entities()))
        pool = enumerate_candidates(kg, env, anchors_now, times)
    trace.outcome = STEP_CAP
    return trace


def trace_to_episode(
    trace: Trace,
    gold_answers: Sequence[str] = (),
    answer_type: str = "entity",
    granularity: Optional[str] = None,
    embedder: Optional[Embedder] = None,
) -> Episode:
    """Convert a finished trace to a history episode, labeling it when gold answers exist."""
    vec = (embedder or default_embedder()).embed(trace.question)
    correct = None
    if gold_answers:
        correct = trace.answer is not None and any(
            match_answer(trace.answer, g, answer_type, granularity) for g in gold_answers
        )
    return Episode(
        question=trace.question,
        embedding=tuple(float(v) for v in vec),
        steps=tuple(
            EpisodeStep(s.index, tuple(s.candidates), s.action or "(no valid action)", s.result) for s in trace.steps
        ),
        final_answer=trace.answer or "",
        gold_answers=tuple(gold_answers),
        correct=correct,
    )
