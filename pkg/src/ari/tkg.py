"""In-memory temporal knowledge graph: loading, indexing and lookup."""

from __future__ import annotations

import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .temporal import Timestamp, TimestampError, span_intersects

logger = logging.getLogger(__name__)

OUTGOING = "outgoing"
INCOMING = "incoming"

FACT_FORMATS = ("tsv", "jsonl")


class KGError(Exception):
    pass


class FactLoadError(KGError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EntityNotFound(KGError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "entity not found"


class AmbiguousEntity(KGError):
    def __init__(self, surface: str, candidates: Sequence[str]):
        self.surface = surface
        self.candidates = list(candidates)
        super().__init__(f"ambiguous entity {surface!r}: candidates {self.candidates}")


def normalize_surface(text: str) -> str:
    """Case/underscore-insensitive key used for entity and answer matching."""
    return re.sub(r"\s+", " ", text.replace("_", " ")).strip().lower()


@dataclass(frozen=True)
class TemporalFact:
    head: str
    relation: str
    tail: str
    start: Timestamp
    end: Timestamp

    def __post_init__(self) -> None:
        if self.end.sort_key < self.start.sort_key:
            raise ValueError(f"fact interval ends before it starts: {self}")

    @property
    def sort_key(self) -> tuple:
        # interval start first, as Timestamp ordering is defined on starts
        return (self.start.start, self.head, self.relation, self.tail, self.end.end, self.start.end)

    def overlaps(self, ts: Timestamp) -> bool:
        return span_intersects(self.start, self.end, ts)


@dataclass(frozen=True)
class Subgraph:
    center: str
    pairs: Tuple[Tuple[str, str, str], ...]  # (neighbor, relation, direction)

    def __len__(self) -> int:
        return len(self.pairs)

    def neighbors(self) -> set:
        return {n for n, _, _ in self.pairs}


class TemporalKG:
    """Immutable fact collection with head/tail/relation indices."""

    def __init__(
        self,
        facts: Iterable[TemporalFact],
        aliases: Optional[Mapping[str, str]] = None,
        entities: Iterable[str] = (),
    ):
        aliases = dict(aliases or {})
        unique = sorted(set(facts), key=lambda f: f.sort_key)
        self._facts: Tuple[TemporalFact, ...] = tuple(unique)
        by_head: Dict[str, List[int]] = defaultdict(list)
        by_tail: Dict[str, List[int]] = defaultdict(list)
        by_rel: Dict[str, List[int]] = defaultdict(list)
        by_hr: Dict[Tuple[str, str], List[int]] = defaultdict(list)
        by_tr: Dict[Tuple[str, str], List[int]] = defaultdict(list)
        for i, f in enumerate(self._facts):
            by_head[f.head].append(i)
            by_tail[f.tail].append(i)
            by_rel[f.relation].append(i)
            by_hr[f.head, f.relation].append(i)
            by_tr[f.tail, f.relation].append(i)
        freeze = lambda d: MappingProxyType({k: tuple(v) for k, v in d.items()})  # noqa: E731
        self._by_head = freeze(by_head)
        self._by_tail = freeze(by_tail)
        self._by_rel = freeze(by_rel)
        self._by_hr = freeze(by_hr)
        self._by_tr = freeze(by_tr)

        # isolated entities (no incident facts) enter via ``entities`` or alias canonicals
        self.entities = frozenset(by_head) | frozenset(by_tail) | frozenset(entities) | frozenset(aliases.values())
        self.relations = frozenset(by_rel)

        norm: Dict[str, List[str]] = defaultdict(list)
        for e in sorted(self.entities):
            norm[normalize_surface(e)].append(e)
        self._norm_entities = MappingProxyType({k: tuple(v) for k, v in norm.items()})
        rnorm: Dict[str, List[str]] = defaultdict(list)
        for r in sorted(self.relations):
            rnorm[normalize_surface(r)].append(r)
        self._norm_relations = MappingProxyType({k: tuple(v) for k, v in rnorm.items()})

        alias_map: Dict[str, set] = defaultdict(set)
        for alias, canonical in aliases.items():
            alias_map[normalize_surface(alias)].add(canonical)
        self._aliases = MappingProxyType({k: tuple(sorted(v)) for k, v in alias_map.items()})
        self.records_read = len(self._facts)

    @property
    def facts(self) -> Tuple[TemporalFact, ...]:
        return self._facts

    def __len__(self) -> int:
        return len(self._facts)

    def stats(self) -> Dict[str, int]:
        return {
            "facts": len(self._facts),
            "entities": len(self.entities),
            "relations": len(self.relations),
            "aliases": len(self._aliases),
            "duplicates_dropped": self.records_read - len(self._facts),
        }

    def has_entity(self, e: str) -> bool:
        return e in self.entities

    def match_facts(
        self,
        head: Optional[str] = None,
        relation: Optional[str] = None,
        tail: Optional[str] = None,
        time: Optional[Timestamp] = None,
    ) -> List[TemporalFact]:
        """All facts agreeing with every bound field, in (start, head, relation, tail) order.

        A bound ``time`` matches when the fact interval intersects it.
        """
        if head is None and relation is None and tail is None:
            raise ValueError("match_facts needs at least one of head/relation/tail")
        if head is not None and relation is not None:
            idx = self._by_hr.get((head, relation), ())
        elif tail is not None and relation is not None:
            idx = self._by_tr.get((tail, relation), ())
        elif head is not None:
            idx = self._by_head.get(head, ())
        elif tail is not None:
            idx = self._by_tail.get(tail, ())
        else:
            idx = self._by_rel.get(relation, ())
        out = []
        for i in idx:  # indices are ascending, so output inherits fact order
            f = self._facts[i]
            if head is not None and f.head != head:
                continue
            if tail is not None and f.tail != tail:
                continue
            if relation is not None and f.relation != relation:
                continue
            if time is not None and not f.overlaps(time):
                continue
            out.append(f)
        return out

    def one_hop_subgraph(self, e: str) -> Subgraph:
        if e not in self.entities:
            raise EntityNotFound(f"unknown entity: {e!r}")
        pairs = {(f.tail, f.relation, OUTGOING) for f in (self._facts[i] for i in self._by_head.get(e, ()))}
        pairs |= {(f.head, f.relation, INCOMING) for f in (self._facts[i] for i in self._by_tail.get(e, ()))}
        ordered = sorted(pairs, key=lambda p: (p[1], p[0], p[2]))
        return Subgraph(center=e, pairs=tuple(ordered))

    def resolve_entity(self, surface: str) -> str:
        """Map a surface string to a canonical entity id.

        Tries exact match, then case/underscore-insensitive match, then aliases.
        """
        s = surface.strip()
        if s in self.entities:
            return s
        key = normalize_surface(s)
        hits = self._norm_entities.get(key, ())
        if len(hits) == 1:
            return hits[0]
        if len(hits) > 1:
            raise AmbiguousEntity(surface, hits)
        hits = tuple(h for h in self._aliases.get(key, ()) if h in self.entities)
        if len(hits) == 1:
            return hits[0]
        if len(hits) > 1:
            raise AmbiguousEntity(surface, hits)
        raise EntityNotFound(f"unknown entity: {surface!r}")

    def resolve_relation(self, surface: str) -> str:
        s = surface.strip()
        if s in self.relations:
            return s
        hits = self._norm_relations.get(normalize_surface(s), ())
        if len(hits) == 1:
            return hits[0]
        if len(hits) > 1:
            raise AmbiguousEntity(surface, hits)
        raise EntityNotFound(f"unknown relation: {surface!r}")


def _parse_ts(text: str, line: int) -> Timestamp:
    try:
        return Timestamp.parse(text)
    except TimestampError:
        raise FactLoadError(f"unparsable timestamp {text!r}", line) from None


def _fact_from_fields(fields: Sequence[str], line: int) -> TemporalFact:
    if len(fields) not in (4, 5) or not all(x.strip() for x in fields[:3]):
        raise FactLoadError(f"expected head, relation, tail, start[, end]; got {len(fields)} fields", line)
    head, rel, tail = (x.strip() for x in fields[:3])
    start = _parse_ts(fields[3], line)
    end = _parse_ts(fields[4], line) if len(fields) == 5 and fields[4].strip() else start
    try:
        return TemporalFact(head, rel, tail, start, end)
    except ValueError as exc:
        raise FactLoadError(str(exc), line) from None


def read_facts(source: Union[str, Path], fmt: str = "tsv") -> List[TemporalFact]:
    if fmt not in FACT_FORMATS:
        raise ValueError(f"unknown fact format {fmt!r}; expected one of {FACT_FORMATS}")
    facts = []
    with open(source, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.rstrip("\r\n")
            if not raw.strip():
                continue
            if fmt == "tsv":
                fields = raw.split("\t")
            else:
                try:
                    rec = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise FactLoadError(f"bad JSON: {exc.msg}", lineno) from None
                if not isinstance(rec, dict):
                    raise FactLoadError("record is not an object", lineno)
                fields = [str(rec.get(k, "")) for k in ("head", "relation", "tail", "start")]
                if rec.get("end"):
                    fields.append(str(rec["end"]))
            facts.append(_fact_from_fields(fields, lineno))
    return facts


def read_aliases(path: Union[str, Path]) -> Dict[str, str]:
    """Alias file: ``canonical<TAB>alias`` per line."""
    out: Dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            parts = raw.rstrip("\r\n").split("\t")
            if len(parts) != 2:
                raise FactLoadError("alias line needs canonical<TAB>alias", lineno)
            out[parts[1].strip()] = parts[0].strip()
    return out


def load_facts(
    source: Union[str, Path], fmt: str = "tsv", aliases: Union[str, Path, Mapping[str, str], None] = None
) -> TemporalKG:
    facts = read_facts(source, fmt)
    if aliases is not None and not isinstance(aliases, Mapping):
        aliases = read_aliases(aliases)
    kg = TemporalKG(facts, aliases)
    kg.records_read = len(facts)
    dupes = len(facts) - len(kg)
    logger.info("loaded %d facts (%d duplicates dropped) from %s", len(kg), dupes, source)
    return kg
