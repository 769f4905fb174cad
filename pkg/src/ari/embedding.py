"""Text embeddings and cosine similarity.

The default backend is a signed feature-hashing bag of words, which needs no
model download and is bit-for-bit reproducible. A remote backend posts text
to an HTTP embedding endpoint for real runs.
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
import threading
import time
from typing import Callable, Dict, List, Optional, Protocol, Sequence

import httpx
import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_DIM = 256
_TOKEN_RE = re.compile(r"[a-z0-9]+")


class EmbeddingBackendError(RuntimeError):
    def __init__(self, message: str, attempts: int = 0, status: Optional[int] = None):
        self.attempts = attempts
        self.status = status
        super().__init__(message)


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def tokenize(text: str) -> List[str]:
    return _TOKEN_RE.findall(text.lower())


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(v))
    return v / n if n > 0 else np.zeros_like(v)


def _bucket(token: str, dim: int) -> tuple:
    h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
    return h % dim, (1.0 if (h >> 63) & 1 == 0 else -1.0)


class HashingEmbedder:
    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self._cache: Dict[str, np.ndarray] = {}

    def embed(self, text: str) -> np.ndarray:
        hit = self._cache.get(text)
        if hit is not None:
            return hit
        v = np.zeros(self.dim, dtype=np.float64)
        for tok in tokenize(text):
            idx, sign = _bucket(tok, self.dim)
            v[idx] += sign
        v = normalize(v)
        v.setflags(write=False)
        self._cache[text] = v
        return v


class RemoteEmbedder:
    """POSTs ``{"model": ..., "input": text}`` and expects a numeric array back.

    Both a bare JSON array and the ``{"data": [{"embedding": [...]}]}`` shape
    are accepted. Transient failures (transport errors, 429, 5xx) are retried
    with exponential backoff.
    """

    def __init__(
        self,
        url: str,
        model: str = "text-embedding-3-small",
        api_key_env: str = "EMBEDDING_API_KEY",
        timeout: float = 30.0,
        retries: int = 3,
        backoff: float = 1.0,
        max_in_flight: int = 4,
        client: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.url = url
        self.model = model
        self.api_key_env = api_key_env
        self.retries = retries
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)
        self._gate = threading.BoundedSemaphore(max_in_flight)
        self._sleep = sleep
        self._memo: Dict[str, np.ndarray] = {}
        self.dim = 0

    def _headers(self) -> Dict[str, str]:
        key = os.environ.get(self.api_key_env, "")
        return {"Authorization": f"Bearer {key}"} if key else {}

    def embed(self, text: str) -> np.ndarray:
        if text in self._memo:
            return self._memo[text]
        last: Optional[Exception] = None
        status = None
        for attempt in range(1, self.retries + 2):
            try:
                with self._gate:
                    resp = self._client.post(
                        self.url, json={"model": self.model, "input": text}, headers=self._headers()
                    )
                status = resp.status_code
                if status == 429 or status >= 500:
                    raise EmbeddingBackendError(f"HTTP {status}", attempt, status)
                if status >= 400:
                    raise EmbeddingBackendError(f"HTTP {status}: {resp.text[:200]}", attempt, status)
                vec = normalize(np.asarray(_extract_vector(resp.json()), dtype=np.float64))
                self.dim = vec.shape[0]
                self._memo[text] = vec
                return vec
            except (httpx.TransportError, EmbeddingBackendError, ValueError) as exc:
                last = exc
                retryable = isinstance(exc, httpx.TransportError) or (
                    isinstance(exc, EmbeddingBackendError) and (status == 429 or (status or 0) >= 500)
                )
                if not retryable or attempt > self.retries:
                    break
                logger.warning("embedding request failed (attempt %d): %s", attempt, exc)
                self._sleep(self.backoff * 2 ** (attempt - 1))
        raise EmbeddingBackendError(f"embedding request failed: {last}", attempt, status)


def _extract_vector(payload) -> Sequence[float]:
    if isinstance(payload, dict):
        if "data" in payload:
            payload = payload["data"][0]["embedding"]
        elif "embedding" in payload:
            payload = payload["embedding"]
    if not isinstance(payload, list) or not payload or not all(isinstance(x, (int, float)) for x in payload):
        raise ValueError("embedding response is not a numeric array")
    return payload


_default = HashingEmbedder()


def default_embedder() -> HashingEmbedder:
    return _default


def embed_text(text: str, embedder: Optional[Embedder] = None) -> np.ndarray:
    return (embedder or _default).embed(text)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between ``a`` and ``b``; 0 when either is all-zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a / na, b / nb), -1.0, 1.0))
