"""Completion backends behind one ``complete(request) -> text`` interface."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Protocol, Sequence, Union

import httpx

logger = logging.getLogger(__name__)

ACTION_SELECTION = "action_selection"
METHODOLOGY_INDUCTION = "methodology_induction"
TAGS = (ACTION_SELECTION, METHODOLOGY_INDUCTION)


class GatewayError(RuntimeError):
    pass


class ReplayError(GatewayError):
    pass


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    tag: str = ACTION_SELECTION
    temperature: float = 0.0
    max_tokens: int = 512

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.tag not in TAGS:
            raise ValueError(f"unknown request tag {self.tag!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


class Backend(Protocol):
    def complete(self, req: CompletionRequest) -> str: ...


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ScriptEntry:
    response: str
    tag: str = ACTION_SELECTION


class ScriptedLLM:
    """Offline replay backend.

    A request is answered by ``by_prompt[sha256(prompt)]`` when present,
    otherwise by the next unused script entry carrying the request's tag.
    """

    def __init__(self, script: Sequence[Union[str, ScriptEntry]] = (), by_prompt: Optional[Mapping[str, str]] = None):
        entries = [ScriptEntry(s) if isinstance(s, str) else s for s in script]
        self._queues: Dict[str, List[str]] = {t: [e.response for e in entries if e.tag == t] for t in TAGS}
        self._cursor = {t: 0 for t in TAGS}
        self._by_prompt = dict(by_prompt or {})

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ScriptedLLM":
        """Script file: JSON list (or JSON lines) of ``{"tag": ..., "response": ...}``."""
        text = Path(path).read_text(encoding="utf-8")
        stripped = text.lstrip()
        if stripped.startswith("["):
            records = json.loads(text)
        else:
            records = [json.loads(line) for line in text.splitlines() if line.strip()]
        entries = []
        by_prompt = {}
        for rec in records:
            if isinstance(rec, str):
                entries.append(ScriptEntry(rec))
            elif "prompt_sha256" in rec:
                by_prompt[rec["prompt_sha256"]] = rec["response"]
            else:
                entries.append(ScriptEntry(rec["response"], rec.get("tag", ACTION_SELECTION)))
        return cls(entries, by_prompt)

    def remaining(self, tag: str = ACTION_SELECTION) -> int:
        return len(self._queues[tag]) - self._cursor[tag]

    def complete(self, req: CompletionRequest) -> str:
        h = prompt_hash(req.prompt)
        if h in self._by_prompt:
            return self._by_prompt[h]
        i = self._cursor[req.tag]
        queue = self._queues[req.tag]
        if i >= len(queue):
            raise ReplayError(f"script exhausted for key ({req.tag!r}, {i})")
        self._cursor[req.tag] = i + 1
        return queue[i]


class CallableLLM:
    """Wraps ``fn(prompt) -> text``; handy for scripted policies in tests."""

    def __init__(self, fn: Callable[[str], str]):
        self._fn = fn

    def complete(self, req: CompletionRequest) -> str:
        return self._fn(req.prompt)


class RemoteLLM:
    """Single-turn chat-completions client with retry and an in-flight cap."""

    def __init__(
        self,
        base_url: str = "https://api.openai.com/v1",
        model: str = "gpt-3.5-turbo-0613",
        api_key_env: str = "OPENAI_API_KEY",
        timeout: float = 60.0,
        retries: int = 3,
        backoff: float = 2.0,
        max_in_flight: int = 4,
        client: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.api_key_env = api_key_env
        self.retries = retries
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)
        self._gate = threading.BoundedSemaphore(max_in_flight)
        self._sleep = sleep

    def payload(self, req: CompletionRequest) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }

    def complete(self, req: CompletionRequest) -> str:
        key = os.environ.get(self.api_key_env, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        last = "no attempt made"
        for attempt in range(1, self.retries + 2):
            try:
                with self._gate:
                    resp = self._client.post(self.url, json=self.payload(req), headers=headers)
            except httpx.TransportError as exc:
                last = f"transport error: {exc}"
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()["choices"][0]["message"]["content"] or ""
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise GatewayError(f"malformed completion response: {exc}") from None
                last = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if resp.status_code != 429 and resp.status_code < 500:
                    raise GatewayError(last)
            if attempt <= self.retries:
                logger.warning("completion attempt %d failed: %s", attempt, last)
                self._sleep(self.backoff * 2 ** (attempt - 1))
        raise GatewayError(f"completion failed after {self.retries + 1} attempts: {last}")


class LLMGateway:
    """Front door for all model calls; every exchange is appended to the run log."""

    def __init__(self, backend: Backend, log_path: Union[str, Path, None] = None):
        self.backend = backend
        self.log_path = Path(log_path) if log_path else None
        self.records: List[dict] = []
        self._lock = threading.Lock()

    def complete(self, req: CompletionRequest) -> str:
        text = self.backend.complete(req)
        rec = {"seq": 0, **asdict(req), "response": text}
        with self._lock:
            rec["seq"] = len(self.records)
            self.records.append(rec)
            if self.log_path is not None:
                with open(self.log_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
        return text
