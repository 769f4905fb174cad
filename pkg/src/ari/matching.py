from __future__ import annotations

from typing import Iterable, Optional, Sequence

from .temporal import Timestamp, TimestampError
from .tkg import normalize_surface


def match_answer(predicted: str, gold: str, answer_type: str = "entity", granularity: Optional[str] = None) -> bool:
    """Entity answers compare normalized surfaces; time answers compare after
    truncating the prediction to the gold granularity (2014-10-07 hits 2014-10)."""
    if answer_type == "time":
        p = Timestamp.try_parse(str(predicted))
        g = Timestamp.try_parse(str(gold))
        if p is None or g is None:
            return normalize_surface(str(predicted)) == normalize_surface(str(gold))
        target = granularity or g.granularity
        try:
            return str(p.truncate(target)) == str(g.truncate(target))
        except TimestampError:
            return False
    return normalize_surface(str(predicted)) == normalize_surface(str(gold))


def hit_rank(ranked: Sequence[str], golds: Iterable[str], answer_type: str, granularity: Optional[str] = None) -> Optional[int]:
    """1-based rank of the first prediction matching any gold, or None."""
    golds = list(golds)
    for i, pred in enumerate(ranked, start=1):
        if any(match_answer(pred, g, answer_type, granularity) for g in golds):
            return i
    return None
