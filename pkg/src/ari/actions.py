"""The nine-function action language the agent uses to query the graph.

Canonical text form is ``$fn(arg1,arg2,...)$`` with no spaces after commas,
``{entities}`` for the current result binding and ``no time`` for an absent
time constraint.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple, Union

from .temporal import Timestamp, TimestampError
from .tkg import AmbiguousEntity, EntityNotFound, TemporalKG


class ActionError(Exception):
    pass


class ActionParseError(ActionError):
    def __init__(self, message: str, code: str = "invalid"):
        self.code = code
        super().__init__(message)


class ActionExecutionError(ActionError):
    pass


@dataclass(frozen=True)
class EntityRef:
    name: str


@dataclass(frozen=True)
class RelationRef:
    name: str


@dataclass(frozen=True)
class EntitiesPlaceholder:
    pass


@dataclass(frozen=True)
class NoTime:
    pass


@dataclass(frozen=True)
class AnswerLiteral:
    text: str


@dataclass(frozen=True)
class ItemsLiteral:
    items: Tuple[Tuple[str, Timestamp], ...]


ENTITIES = EntitiesPlaceholder()
NO_TIME = NoTime()

Argument = Union[EntityRef, RelationRef, Timestamp, EntitiesPlaceholder, NoTime, AnswerLiteral, ItemsLiteral]

SIGNATURES = {
    "getTailEntity": ("entity", "relation", "opt_time"),
    "getHeadEntity": ("entity", "relation", "opt_time"),
    "getTime": ("entity", "relation", "entity"),
    "getBetween": ("list", "time", "time"),
    "getBefore": ("list", "time"),
    "getAfter": ("list", "time"),
    "getFirst": ("list",),
    "getLast": ("list",),
    "answer": ("answer",),
}
FUNCTIONS = tuple(SIGNATURES)
LIST_OPERATORS = ("getBetween", "getBefore", "getAfter", "getFirst", "getLast")

_SLOT_TYPES = {
    "entity": (EntityRef,),
    "relation": (RelationRef,),
    "opt_time": (Timestamp, NoTime),
    "time": (Timestamp,),
    "list": (EntitiesPlaceholder, ItemsLiteral),
    "answer": (Timestamp, AnswerLiteral),
}


def _fn_key(name: str) -> str:
    return name.replace("_", "").lower()


# accepts camelCase, snake_case (get_time) and any casing
_FN_LOOKUP = {_fn_key(f): f for f in FUNCTIONS}

_NO_TIME_WORDS = {"no time", "notime", "no_time", "none", "null", ""}
_PLACEHOLDER_WORDS = {"{entities}", "entities", "entity_list", "{entity_list}"}


@dataclass(frozen=True)
class ActionExpr:
    function: str
    args: Tuple[Argument, ...] = ()

    def __post_init__(self) -> None:
        if self.function not in SIGNATURES:
            raise ActionParseError(f"unknown function {self.function!r}", "unknown_function")
        sig = SIGNATURES[self.function]
        if len(self.args) != len(sig):
            raise ActionParseError(
                f"{self.function} expects {len(sig)} argument(s), got {len(self.args)}", "arity"
            )
        for i, (slot, arg) in enumerate(zip(sig, self.args)):
            if not isinstance(arg, _SLOT_TYPES[slot]):
                if isinstance(arg, NoTime):
                    raise ActionParseError(
                        f"{self.function}: 'no time' only allowed in the optional time slot", "bad_argument"
                    )
                raise ActionParseError(
                    f"{self.function}: argument {i + 1} must be {slot}, got {type(arg).__name__}", "bad_argument"
                )

    @property
    def is_answer(self) -> bool:
        return self.function == "answer"

    def uses_placeholder(self) -> bool:
        return any(isinstance(a, EntitiesPlaceholder) for a in self.args)

    def __str__(self) -> str:
        return render_action(self)


# ---------------------------------------------------------------- rendering


def _render_arg(arg: Argument) -> str:
    if isinstance(arg, (EntityRef, RelationRef)):
        return arg.name
    if isinstance(arg, Timestamp):
        return str(arg)
    if isinstance(arg, EntitiesPlaceholder):
        return "{entities}"
    if isinstance(arg, NoTime):
        return "no time"
    if isinstance(arg, AnswerLiteral):
        return arg.text
    if isinstance(arg, ItemsLiteral):
        return "[" + ",".join(f"({e},{t})" for e, t in arg.items) + "]"
    raise TypeError(f"not an action argument: {arg!r}")


def render_action(a: ActionExpr) -> str:
    return f"${a.function}({','.join(_render_arg(x) for x in a.args)})$"


def similarity_text(a: ActionExpr) -> str:
    """Text embedded when scoring an action against a question."""
    body = render_action(a).strip("$")
    name, _, rest = body.partition("(")
    words = re.sub(r"(?<=[a-z])(?=[A-Z])", " ", name).lower()
    return f"{words} {rest.rstrip(')')}".replace("_", " ")


# ------------------------------------------------------------------ parsing

_DOLLAR_RE = re.compile(r"\$([^$]*)\$")
_ACTION_MARKER_RE = re.compile(r"action\s*:", re.I)
_ALL_NAMES = sorted(
    set(FUNCTIONS)
    | {re.sub(r"(?<=[a-z])(?=[A-Z])", "_", f).lower() for f in FUNCTIONS},
    key=len,
    reverse=True,
)
_BARE_RE = re.compile(r"\b(" + "|".join(_ALL_NAMES) + r")\s*\(", re.I)
_OPEN = "([{"
_CLOSE = ")]}"


def _matching_close(text: str, open_idx: int) -> int:
    depth = 0
    for i in range(open_idx, len(text)):
        c = text[i]
        if c in _OPEN:
            depth += 1
        elif c in _CLOSE:
            depth -= 1
            if depth == 0:
                return i
    return -1


def split_top_level(text: str, sep: str = ",") -> List[str]:
    """Split on ``sep`` outside (), [] and {} nesting."""
    parts, depth, cur = [], 0, []
    for c in text:
        if c in _OPEN:
            depth += 1
        elif c in _CLOSE:
            depth = max(depth - 1, 0)
        if c == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(c)
    parts.append("".join(cur))
    return parts


def _unquote(s: str) -> str:
    s = s.strip()
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "'\"`":
        s = s[1:-1].strip()
    return s


def _extract_call(text: str) -> str:
    marker = _ACTION_MARKER_RE.search(text)
    if marker:
        m = _DOLLAR_RE.search(text, marker.end())
        if m and m.group(1).strip():
            return m.group(1)
    for m in _DOLLAR_RE.finditer(text):
        if m.group(1).strip():
            return m.group(1)
    m = _BARE_RE.search(text)
    if m:
        open_idx = m.end() - 1
        close = _matching_close(text, open_idx)
        return text[m.start() : close + 1] if close >= 0 else text[m.start() :]
    raise ActionParseError("no action: expected an action enclosed in $...$", "no_action")


def _parse_time(raw: str, fn: str) -> Timestamp:
    try:
        return Timestamp.parse(raw)
    except TimestampError:
        raise ActionParseError(f"{fn}: bad timestamp {raw!r} (use YYYY, YYYY-MM or YYYY-MM-DD)", "bad_timestamp") from None


def _parse_items(raw: str, fn: str) -> ItemsLiteral:
    inner = raw.strip()[1:-1].strip()
    items = []
    if inner:
        for chunk in split_top_level(inner):
            chunk = chunk.strip()
            if not (chunk.startswith("(") and chunk.endswith(")")):
                raise ActionParseError(f"{fn}: bad list item {chunk!r}", "bad_argument")
            pair = split_top_level(chunk[1:-1])
            if len(pair) != 2:
                raise ActionParseError(f"{fn}: list item needs (entity,time): {chunk!r}", "bad_argument")
            items.append((_unquote(pair[0]), _parse_time(_unquote(pair[1]), fn)))
    return ItemsLiteral(tuple(items))


def _parse_arg(raw: str, slot: str, fn: str) -> Argument:
    text = _unquote(raw)
    low = text.lower()
    is_placeholder = low in _PLACEHOLDER_WORDS
    is_no_time = low in _NO_TIME_WORDS
    if slot == "list":
        if is_placeholder:
            return ENTITIES
        if text.startswith("[") and text.endswith("]"):
            return _parse_items(text, fn)
        raise ActionParseError(f"{fn}: expected {{entities}} or a list literal, got {text!r}", "bad_argument")
    if slot == "opt_time":
        return NO_TIME if is_no_time else _parse_time(text, fn)
    if is_no_time:
        raise ActionParseError(f"{fn}: 'no time' only allowed in the optional time slot", "bad_argument")
    if is_placeholder:
        raise ActionParseError(f"{fn}: {{entities}} only allowed as a list argument", "bad_argument")
    if slot == "time":
        return _parse_time(text, fn)
    if slot == "entity":
        return EntityRef(text)
    if slot == "relation":
        return RelationRef(text)
    ts = Timestamp.try_parse(text)
    return ts if ts is not None else AnswerLiteral(text)


def parse_action(text: str) -> ActionExpr:
    """Parse raw model output into a validated ActionExpr."""
    call = _extract_call(text).strip()
    paren = call.find("(")
    if paren < 0:
        raise ActionParseError(f"no action: {call!r} is not a function call", "no_action")
    name = call[:paren].strip()
    fn = _FN_LOOKUP.get(_fn_key(name))
    if fn is None:
        raise ActionParseError(f"unknown function {name!r}", "unknown_function")
    close = _matching_close(call, paren)
    # tolerate a missing closing parenthesis
    inner = call[paren + 1 : close] if close >= 0 else call[paren + 1 :]
    raw_args = split_top_level(inner)
    sig = SIGNATURES[fn]
    if len(raw_args) == 1 and not raw_args[0].strip():
        raw_args = []
    if len(raw_args) != len(sig):
        raise ActionParseError(f"{fn} expects {len(sig)} argument(s), got {len(raw_args)}", "arity")
    return ActionExpr(fn, tuple(_parse_arg(r, slot, fn) for r, slot in zip(raw_args, sig)))


# ---------------------------------------------------------------- execution


@dataclass(frozen=True)
class ResultSet:
    """Ordered (entity, timestamp) pairs; sorted by interval start, then entity."""

    items: Tuple[Tuple[str, Timestamp], ...] = ()

    @classmethod
    def of(cls, pairs: Iterable[Tuple[str, Timestamp]]) -> "ResultSet":
        uniq = set(pairs)
        return cls(tuple(sorted(uniq, key=lambda p: (p[1].start, p[0], p[1].end))))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __bool__(self) -> bool:
        return bool(self.items)

    def entities(self) -> List[str]:
        """Distinct entities in result order."""
        return list(dict.fromkeys(e for e, _ in self.items))

    def times(self) -> List[Timestamp]:
        return list(dict.fromkeys(t for _, t in self.items))

    def summary(self, limit: int = 5) -> str:
        shown = ", ".join(f"({e!r}, '{t}')" for e, t in self.items[:limit])
        more = ", ..." if len(self.items) > limit else ""
        return f"entities = [{shown}{more}]"


@dataclass(frozen=True)
class FinalAnswer:
    literal: str
    value: Union[Timestamp, str]
    items: ResultSet

    def summary(self) -> str:
        return f"answer = {self.literal}"


@dataclass
class StepEnv:
    current: ResultSet = field(default_factory=ResultSet)
    feedback: str = ""

    def copy(self) -> "StepEnv":
        return StepEnv(self.current, self.feedback)


def _lookup(kg: TemporalKG, name: str, relation: bool = False) -> Optional[str]:
    try:
        return kg.resolve_relation(name) if relation else kg.resolve_entity(name)
    except EntityNotFound:
        return None
    except AmbiguousEntity as exc:
        raise ActionExecutionError(str(exc)) from None


def _list_arg(arg: Argument, env: StepEnv, fn: str) -> ResultSet:
    if isinstance(arg, ItemsLiteral):
        return ResultSet.of(arg.items)
    if not env.current:
        raise ActionExecutionError(f"{fn}: {{entities}} has no prior non-empty result to bind to")
    return env.current


def _evaluate(a: ActionExpr, kg: TemporalKG, env: StepEnv) -> Union[ResultSet, FinalAnswer]:
    fn, args = a.function, a.args
    if fn in ("getTailEntity", "getHeadEntity"):
        anchor = _lookup(kg, args[0].name)
        rel = _lookup(kg, args[1].name, relation=True)
        if anchor is None or rel is None:
            return ResultSet()
        time = args[2] if isinstance(args[2], Timestamp) else None
        if fn == "getTailEntity":
            facts = kg.match_facts(head=anchor, relation=rel, time=time)
            return ResultSet.of((f.tail, f.start) for f in facts)
        facts = kg.match_facts(tail=anchor, relation=rel, time=time)
        return ResultSet.of((f.head, f.start) for f in facts)
    if fn == "getTime":
        head = _lookup(kg, args[0].name)
        rel = _lookup(kg, args[1].name, relation=True)
        tail = _lookup(kg, args[2].name)
        if head is None or rel is None or tail is None:
            return ResultSet()
        return ResultSet.of((f.head, f.start) for f in kg.match_facts(head=head, relation=rel, tail=tail))
    if fn == "answer":
        arg = args[0]
        value = arg if isinstance(arg, Timestamp) else arg.text
        return FinalAnswer(literal=str(value), value=value, items=env.current)

    items = _list_arg(args[0], env, fn)
    if fn == "getBefore":
        return ResultSet(tuple(p for p in items if p[1].before(args[1])))
    if fn == "getAfter":
        return ResultSet(tuple(p for p in items if p[1].after(args[1])))
    if fn == "getBetween":
        lo, hi = args[1].start, args[2].end
        return ResultSet(tuple(p for p in items if p[1].start <= hi and lo <= p[1].end))
    if not items:
        return ResultSet()
    if fn == "getFirst":
        edge = min(p[1].start for p in items)
    else:
        edge = max(p[1].start for p in items)
    return ResultSet(tuple(p for p in items if p[1].start == edge))


def execute_action(a: ActionExpr, kg: TemporalKG, env: StepEnv) -> Union[ResultSet, FinalAnswer]:
    """Run ``a`` and update ``env.current`` when the result is a non-empty ResultSet."""
    result = _evaluate(a, kg, env)
    if isinstance(result, ResultSet):
        if result:
            env.current = result
        env.feedback = result.summary()
    return result
