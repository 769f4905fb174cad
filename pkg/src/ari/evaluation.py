"""Question loading, stratified sampling, and Hits@k / step metrics."""

from __future__ import annotations

import csv
import io
import json
import logging
import random
import re
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from .matching import hit_rank
from .memory import MethodologyBank
from .reasoner import NO_CANDIDATES, OUTCOMES, ReasonerConfig, Trace, answer_question
from .temporal import Timestamp
from .tkg import AmbiguousEntity, EntityNotFound, TemporalKG

logger = logging.getLogger(__name__)

QUESTION_FORMATS = ("multitq", "cronquestions")

# category -> question type
TAXONOMY: Dict[str, Dict[str, str]] = {
    "multitq": {
        "equal": "simple",
        "before_after": "simple",
        "first_last": "simple",
        "equal_multi": "complex",
        "after_first": "complex",
        "before_last": "complex",
    },
    "cronquestions": {
        "simple_entity": "simple",
        "simple_time": "simple",
        "time_join": "complex",
        "first_last": "complex",
        "before_after": "complex",
    },
}

RANKING_RULE = "answer literal first, then remaining bound results in time order, deduplicated, top 10"


class QuestionLoadError(ValueError):
    pass


def normalize_category(text: str) -> str:
    return re.sub(r"[\s/\-]+", "_", text.strip().lower()).strip("_")


@dataclass(frozen=True)
class QuestionRecord:
    id: str
    question: str
    anchors: tuple
    gold_answers: tuple
    answer_type: str
    category: str
    question_type: str
    granularity: Optional[str] = None
    split: str = "test"
    times: tuple = ()

    def __post_init__(self) -> None:
        if not self.gold_answers:
            raise QuestionLoadError(f"question {self.id}: no gold answers")
        if (self.granularity is not None) != (self.answer_type == "time"):
            raise QuestionLoadError(f"question {self.id}: granularity must be set exactly for time answers")


def _first(rec: dict, *keys, default=None):
    for k in keys:
        if k in rec and rec[k] is not None:
            return rec[k]
    return default


def _as_list(v) -> list:
    if v is None:
        return []
    if isinstance(v, (list, tuple, set)):
        return [str(x) for x in v]
    return [str(v)]


def parse_question(rec: dict, fmt: str, line: int = 0) -> QuestionRecord:
    taxonomy = TAXONOMY[fmt]
    qid = str(_first(rec, "id", "quid", "qid", default=line))
    raw_cat = _first(rec, "category", "qtype", "type")
    if raw_cat is None:
        raise QuestionLoadError(f"line {line}: missing category")
    category = normalize_category(str(raw_cat))
    if category not in taxonomy:
        raise QuestionLoadError(f"line {line}: unknown {fmt} category {raw_cat!r}")
    gold = _as_list(_first(rec, "gold_answers", "answers", "answer"))
    if not gold:
        raise QuestionLoadError(f"line {line}: missing gold answers")
    answer_type = str(_first(rec, "answer_type", default="entity")).lower()
    if answer_type not in ("entity", "time"):
        raise QuestionLoadError(f"line {line}: answer_type must be entity or time, got {answer_type!r}")
    granularity = None
    if answer_type == "time":
        granularity = _first(rec, "granularity", "time_level")
        if granularity is None:
            stamp = Timestamp.try_parse(gold[0])
            granularity = stamp.granularity if stamp else None
        if granularity not in ("year", "month", "day"):
            raise QuestionLoadError(f"line {line}: time answer needs granularity year/month/day")
    times = []
    for t in _as_list(_first(rec, "times")):
        stamp = Timestamp.try_parse(t)
        if stamp is None:
            raise QuestionLoadError(f"line {line}: bad annotated time {t!r}")
        times.append(stamp)
    return QuestionRecord(
        id=qid,
        question=str(rec["question"]),
        anchors=tuple(_as_list(_first(rec, "anchors", "entities"))),
        gold_answers=tuple(gold),
        answer_type=answer_type,
        category=category,
        question_type=taxonomy[category],
        granularity=granularity,
        split=str(_first(rec, "split", default="test")),
        times=tuple(times),
    )


def load_questions(path: Union[str, Path], fmt: str = "multitq") -> List[QuestionRecord]:
    """Line-delimited JSON question records; category vocabulary checked against ``fmt``."""
    if fmt not in QUESTION_FORMATS:
        raise ValueError(f"unknown question format {fmt!r}")
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise QuestionLoadError(f"line {lineno}: bad JSON ({exc.msg})") from None
            if "question" not in rec:
                raise QuestionLoadError(f"line {lineno}: missing question text")
            out.append(parse_question(rec, fmt, lineno))
    return out


def stratified_sample(records: Sequence[QuestionRecord], n: int, seed: int = 0) -> List[QuestionRecord]:
    """Proportional per-category allocation with largest-remainder rounding."""
    if n > len(records):
        raise ValueError(f"cannot sample {n} from {len(records)} records")
    if n < 0:
        raise ValueError("n must be non-negative")
    groups: Dict[str, List[QuestionRecord]] = defaultdict(list)
    for r in records:
        groups[r.category].append(r)
    total = len(records)
    cats = sorted(groups)
    exact = {c: n * len(groups[c]) / total for c in cats} if total else {}
    quota = {c: int(exact[c]) for c in cats}
    left = n - sum(quota.values())
    by_remainder = sorted(cats, key=lambda c: (-(exact[c] - quota[c]), -len(groups[c]), c))
    for c in by_remainder[:left]:
        quota[c] += 1
    out = []
    for c in cats:
        members = sorted(groups[c], key=lambda r: r.id)
        random.Random(f"{seed}:{c}").shuffle(members)
        out.extend(members[: quota[c]])
    return out


@dataclass
class Cell:
    n: int = 0
    hits1: int = 0
    hits10: int = 0

    def add(self, rank: Optional[int]) -> None:
        self.n += 1
        if rank is not None and rank <= 1:
            self.hits1 += 1
        if rank is not None and rank <= 10:
            self.hits10 += 1

    @property
    def hits_at_1(self) -> float:
        return self.hits1 / self.n if self.n else 0.0

    @property
    def hits_at_10(self) -> float:
        return self.hits10 / self.n if self.n else 0.0

    def to_dict(self) -> dict:
        return {"n": self.n, "hits@1": self.hits_at_1, "hits@10": self.hits_at_10}


@dataclass
class MetricsReport:
    label: str
    overall: Cell
    by_question_type: Dict[str, Cell]
    by_answer_type: Dict[str, Cell]
    by_category: Dict[str, Cell]
    avg_steps: float
    outcomes: Dict[str, int]
    ranking_rule: str = RANKING_RULE

    @property
    def hits_at_1(self) -> float:
        return self.overall.hits_at_1

    @property
    def hits_at_10(self) -> float:
        return self.overall.hits_at_10

    def cells(self) -> Iterable[tuple]:
        yield "overall", "all", self.overall
        for group, table in (
            ("question_type", self.by_question_type),
            ("answer_type", self.by_answer_type),
            ("category", self.by_category),
        ):
            for key in sorted(table):
                yield group, key, table[key]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "overall": self.overall.to_dict(),
            "by_question_type": {k: v.to_dict() for k, v in sorted(self.by_question_type.items())},
            "by_answer_type": {k: v.to_dict() for k, v in sorted(self.by_answer_type.items())},
            "by_category": {k: v.to_dict() for k, v in sorted(self.by_category.items())},
            "avg_steps": self.avg_steps,
            "outcomes": dict(sorted(self.outcomes.items())),
            "ranking_rule": self.ranking_rule,
        }

    def to_table(self) -> str:
        lines = [f"Run: {self.label}", f"{'group':<14}{'cell':<16}{'n':>6}{'Hits@1':>9}{'Hits@10':>9}"]
        for group, key, c in self.cells():
            lines.append(f"{group:<14}{key:<16}{c.n:>6}{c.hits_at_1:>9.3f}{c.hits_at_10:>9.3f}")
        lines.append(f"average reasoning steps: {self.avg_steps:.3f}")
        lines.append("outcomes: " + ", ".join(f"{k}={v}" for k, v in sorted(self.outcomes.items())))
        lines.append(f"Hits@10 ranking rule: {self.ranking_rule}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "group", "cell", "n", "hits@1", "hits@10"])
        for group, key, c in self.cells():
            w.writerow([self.label, group, key, c.n, f"{c.hits_at_1:.6f}", f"{c.hits_at_10:.6f}"])
        return buf.getvalue()


def compute_metrics(records: Sequence[QuestionRecord], traces: Sequence[Trace], label: str = "ARI") -> MetricsReport:
    if len(records) != len(traces):
        raise ValueError("records and traces differ in length")
    overall = Cell()
    by_qt: Dict[str, Cell] = defaultdict(Cell)
    by_at: Dict[str, Cell] = defaultdict(Cell)
    by_cat: Dict[str, Cell] = defaultdict(Cell)
    outcomes = {o: 0 for o in OUTCOMES}
    steps = 0
    for rec, tr in zip(records, traces):
        rank = hit_rank(tr.ranked_answers, rec.gold_answers, rec.answer_type, rec.granularity)
        for cell in (overall, by_qt[rec.question_type], by_at[rec.answer_type], by_cat[rec.category]):
            cell.add(rank)
        outcomes[tr.outcome] = outcomes.get(tr.outcome, 0) + 1
        steps += tr.n_steps
    return MetricsReport(
        label=label,
        overall=overall,
        by_question_type=dict(by_qt),
        by_answer_type=dict(by_at),
        by_category=dict(by_cat),
        avg_steps=steps / len(records) if records else 0.0,
        outcomes=outcomes,
    )


def _resolve_anchors(kg: TemporalKG, surfaces: Sequence[str]) -> List[str]:
    out = []
    for s in surfaces:
        try:
            out.append(kg.resolve_entity(s))
        except (EntityNotFound, AmbiguousEntity) as exc:
            logger.warning("dropping anchor %r: %s", s, exc)
    return out


def run_question(rec: QuestionRecord, cfg: ReasonerConfig, kg: TemporalKG, memory, llm, embedder=None) -> Trace:
    anchors = _resolve_anchors(kg, rec.anchors)
    if not anchors:
        return Trace(question=rec.question, anchors=[], outcome=NO_CANDIDATES)
    times = list(rec.times) if rec.times else None
    return answer_question(rec.question, anchors, kg, memory, llm, cfg, question_times=times, embedder=embedder)


def evaluate_run(
    records: Sequence[QuestionRecord],
    cfg: ReasonerConfig,
    kg: TemporalKG,
    memory: Optional[MethodologyBank],
    llm,
    embedder=None,
    workers: int = 1,
    trace_path: Union[str, Path, None] = None,
) -> MetricsReport:
    """Answer every record and fold the traces into a report.

    Scripted backends are order-sensitive; keep ``workers=1`` for them.
    """
    def one(rec):
        return run_question(rec, cfg, kg, memory, llm, embedder)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(one, records))
    else:
        traces = [one(r) for r in records]
    if trace_path is not None:
        write_traces(trace_path, records, traces)
    return compute_metrics(records, traces, cfg.label)


def write_traces(path: Union[str, Path], records: Sequence[QuestionRecord], traces: Sequence[Trace]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec, tr in zip(records, traces):
            row = {"id": rec.id, "gold_answers": list(rec.gold_answers), **tr.to_record()}
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
