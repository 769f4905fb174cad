"""Multi-granularity timestamps with inclusive day-interval semantics."""

from __future__ import annotations

import calendar
import re
from dataclasses import dataclass
from datetime import date
from typing import Iterable, List, Optional

GRANULARITIES = ("year", "month", "day")

_TS_RE = re.compile(r"^(\d{4})(?:-(\d{1,2})(?:-(\d{1,2}))?)?$")


class TimestampError(ValueError):
    """Raised when text is not one of YYYY, YYYY-MM, YYYY-MM-DD."""


@dataclass(frozen=True)
class Timestamp:
    year: int
    month: Optional[int] = None
    day: Optional[int] = None

    def __post_init__(self) -> None:
        if self.day is not None and self.month is None:
            raise TimestampError("day given without month")
        if self.month is not None and not 1 <= self.month <= 12:
            raise TimestampError(f"month out of range: {self.month}")
        if self.day is not None:
            last = calendar.monthrange(self.year, self.month)[1]
            if not 1 <= self.day <= last:
                raise TimestampError(f"day out of range: {self}")
        if not 1 <= self.year <= 9999:
            raise TimestampError(f"year out of range: {self.year}")

    @classmethod
    def parse(cls, text: str) -> "Timestamp":
        m = _TS_RE.match(text.strip())
        if not m:
            raise TimestampError(f"unparsable timestamp: {text!r}")
        y, mo, d = m.groups()
        try:
            return cls(int(y), int(mo) if mo else None, int(d) if d else None)
        except TimestampError as exc:
            raise TimestampError(f"unparsable timestamp: {text!r} ({exc})") from None

    @classmethod
    def try_parse(cls, text: str) -> Optional["Timestamp"]:
        try:
            return cls.parse(text)
        except TimestampError:
            return None

    @classmethod
    def from_date(cls, d: date) -> "Timestamp":
        return cls(d.year, d.month, d.day)

    @property
    def granularity(self) -> str:
        if self.day is not None:
            return "day"
        if self.month is not None:
            return "month"
        return "year"

    @property
    def start(self) -> date:
        return date(self.year, self.month or 1, self.day or 1)

    @property
    def end(self) -> date:
        if self.day is not None:
            return date(self.year, self.month, self.day)
        if self.month is not None:
            return date(self.year, self.month, calendar.monthrange(self.year, self.month)[1])
        return date(self.year, 12, 31)

    @property
    def sort_key(self) -> tuple:
        return (self.start, self.end)

    def before(self, other: "Timestamp") -> bool:
        """Strictly before: this interval ends before ``other`` starts."""
        return self.end < other.start

    def after(self, other: "Timestamp") -> bool:
        return self.start > other.end

    def intersects(self, other: "Timestamp") -> bool:
        return self.start <= other.end and other.start <= self.end

    def truncate(self, granularity: str) -> "Timestamp":
        """Coarsen to ``granularity``; asking for a finer one than available raises."""
        if GRANULARITIES.index(granularity) > GRANULARITIES.index(self.granularity):
            raise TimestampError(f"cannot refine {self} to {granularity}")
        if granularity == "year":
            return Timestamp(self.year)
        if granularity == "month":
            return Timestamp(self.year, self.month)
        return self

    def __str__(self) -> str:
        if self.day is not None:
            return f"{self.year:04d}-{self.month:02d}-{self.day:02d}"
        if self.month is not None:
            return f"{self.year:04d}-{self.month:02d}"
        return f"{self.year:04d}"


def span_intersects(start: Timestamp, end: Timestamp, probe: Timestamp) -> bool:
    """Whether the interval [start.start, end.end] meets ``probe``'s interval."""
    return start.start <= probe.end and probe.start <= end.end


_MONTHS = {name.lower(): i for i, name in enumerate(calendar.month_name) if name}
_MONTHS.update({name.lower(): i for i, name in enumerate(calendar.month_abbr) if name})
_MONTHS["sept"] = 9
_MONTH_ALT = "|".join(sorted(_MONTHS, key=len, reverse=True))

_ISO_RE = re.compile(r"(?<![\d-])(\d{4})(?:-(\d{2})(?:-(\d{2}))?)?(?![\d-])")
# "Jul 21st, 2011", "November, 2005", "Dec 2008", "21 July 2011"
_MONTH_DAY_YEAR_RE = re.compile(
    rf"\b({_MONTH_ALT})\.?(?:\s+(\d{{1,2}})(?:st|nd|rd|th)?)?,?\s+(\d{{4}})\b", re.I
)
_DAY_MONTH_YEAR_RE = re.compile(
    rf"\b(\d{{1,2}})(?:st|nd|rd|th)?\s+({_MONTH_ALT})\.?,?\s+(\d{{4}})\b", re.I
)


def extract_timestamps(text: str) -> List[Timestamp]:
    """Pull time literals out of a natural-language question.

    Month-name forms are read before bare years so that "November, 2005"
    yields 2005-11 rather than 2005. Output is deduplicated and sorted.
    """
    found: List[Timestamp] = []
    consumed: List[tuple] = []

    def add(ts: Optional[Timestamp], span: tuple) -> None:
        if ts is not None:
            found.append(ts)
            consumed.append(span)

    for m in _MONTH_DAY_YEAR_RE.finditer(text):
        month = _MONTHS[m.group(1).lower()]
        day = int(m.group(2)) if m.group(2) else None
        add(_safe(int(m.group(3)), month, day), m.span())
    for m in _DAY_MONTH_YEAR_RE.finditer(text):
        if any(s <= m.start() < e for s, e in consumed):
            continue
        add(_safe(int(m.group(3)), _MONTHS[m.group(2).lower()], int(m.group(1))), m.span())
    for m in _ISO_RE.finditer(text):
        if any(s <= m.start() < e for s, e in consumed):
            continue
        y, mo, d = m.groups()
        add(_safe(int(y), int(mo) if mo else None, int(d) if d else None), m.span())
    return sorted_unique(found)


def _safe(year: int, month: Optional[int], day: Optional[int]) -> Optional[Timestamp]:
    try:
        return Timestamp(year, month, day)
    except TimestampError:
        return None


def sorted_unique(stamps: Iterable[Timestamp]) -> List[Timestamp]:
    return sorted(set(stamps), key=lambda t: t.sort_key)
