"""Straight-line reference implementations used as test oracles.

They deliberately avoid the package's indices and interval helpers and work
from the textual form of timestamps and a full scan of the fact list.
"""

from __future__ import annotations

import calendar
import math
from datetime import date
from typing import List, Optional, Sequence, Tuple


def interval(ts) -> Tuple[date, date]:
    parts = [int(p) for p in str(ts).split("-")]
    if len(parts) == 1:
        return date(parts[0], 1, 1), date(parts[0], 12, 31)
    if len(parts) == 2:
        y, m = parts
        return date(y, m, 1), date(y, m, calendar.monthrange(y, m)[1])
    d = date(*parts)
    return d, d


def fact_span(f) -> Tuple[date, date]:
    return interval(f.start)[0], interval(f.end)[1]


def overlaps(a: Tuple[date, date], b: Tuple[date, date]) -> bool:
    return not (a[1] < b[0] or b[1] < a[0])


def scan(facts, head=None, relation=None, tail=None, time=None) -> list:
    out = []
    for f in facts:
        if head is not None and f.head != head:
            continue
        if relation is not None and f.relation != relation:
            continue
        if tail is not None and f.tail != tail:
            continue
        if time is not None and not overlaps(fact_span(f), interval(time)):
            continue
        out.append(f)
    return sorted(set(out), key=lambda f: (interval(f.start)[0], f.head, f.relation, f.tail, interval(f.end)[1], interval(f.start)[1]))


def normalize_items(pairs) -> List[Tuple[str, str]]:
    uniq = {(e, str(t)) for e, t in pairs}
    return sorted(uniq, key=lambda p: (interval(p[1])[0], p[0], interval(p[1])[1]))


def execute(fn: str, args: Sequence[str], facts, current: Sequence[Tuple[str, str]]) -> Optional[List[Tuple[str, str]]]:
    """Reference semantics over plain strings. ``args`` are canonical argument
    texts; ``current`` is the bound list as (entity, time-text) pairs.
    Returns None for answer()."""
    if fn == "getTailEntity":
        time = None if args[2] == "no time" else args[2]
        return normalize_items((f.tail, f.start) for f in scan(facts, head=args[0], relation=args[1], time=time))
    if fn == "getHeadEntity":
        time = None if args[2] == "no time" else args[2]
        return normalize_items((f.head, f.start) for f in scan(facts, tail=args[0], relation=args[1], time=time))
    if fn == "getTime":
        return normalize_items((f.head, f.start) for f in scan(facts, head=args[0], relation=args[1], tail=args[2]))
    if fn == "answer":
        return None
    items = list(current)
    if fn == "getBefore":
        lo = interval(args[1])[0]
        return [p for p in items if interval(p[1])[1] < lo]
    if fn == "getAfter":
        hi = interval(args[1])[1]
        return [p for p in items if interval(p[1])[0] > hi]
    if fn == "getBetween":
        window = (interval(args[1])[0], interval(args[2])[1])
        return [p for p in items if overlaps(interval(p[1]), window)]
    starts = [interval(p[1])[0] for p in items]
    if not starts:
        return []
    edge = min(starts) if fn == "getFirst" else max(starts)
    return [p for p in items if interval(p[1])[0] == edge]


def cosine(a, b) -> float:
    """Cosine in math.fsum arithmetic, independent of numpy's dot."""
    na = math.sqrt(math.fsum(float(x) * float(x) for x in a))
    nb = math.sqrt(math.fsum(float(x) * float(x) for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return math.fsum(float(x) * float(y) for x, y in zip(a, b)) / (na * nb)
