from __future__ import annotations

import json

import httpx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from ari.embedding import EmbeddingBackendError, HashingEmbedder, RemoteEmbedder, cosine_similarity, embed_text

from oracles import cosine


def test_deterministic():
    a = embed_text("who visited Japan")
    b = HashingEmbedder().embed("who visited Japan")
    assert np.array_equal(a, b)
    assert a.shape == (256,)
    assert abs(np.linalg.norm(a) - 1.0) < 1e-12


def test_empty_text_is_zero():
    z = embed_text("")
    assert not z.any()
    assert cosine_similarity(z, embed_text("anything")) == 0.0


def test_ordering_example():
    base = embed_text("who visited Japan")
    near = cosine_similarity(base, embed_text("who visited Japan in 2013"))
    far = cosine_similarity(base, embed_text("earthquake magnitude scale"))
    assert near > far


def test_self_and_antipodal():
    v = embed_text("praise or endorse")
    assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)
    assert cosine_similarity(v, -v) == pytest.approx(-1.0, abs=1e-12)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        cosine_similarity(np.ones(3), np.ones(4))


def test_cosine_oracle_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a, b = rng.normal(size=(2, 32)) * rng.uniform(0.01, 100)
        assert abs(cosine_similarity(a, b) - cosine(a, b)) <= 1e-9


vecs = st.lists(st.floats(-10, 10, allow_nan=False), min_size=8, max_size=8)


@given(vecs, vecs, st.floats(0.001, 1000))
def test_symmetry_and_scale(a, b, c):
    a, b = np.array(a), np.array(b)
    assert cosine_similarity(a, b) == cosine_similarity(b, a)
    assert cosine_similarity(a * c, b) == pytest.approx(cosine_similarity(a, b), abs=1e-9)
    assert -1.0 <= cosine_similarity(a, b) <= 1.0


def test_cached_vectors_read_only():
    v = HashingEmbedder().embed("x y")
    with pytest.raises(ValueError):
        v[0] = 1.0


def _client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_remote_embedder_shapes_and_retry(monkeypatch):
    calls = []
    monkeypatch.setenv("EMB_KEY", "secret")

    def handler(request):
        calls.append(request)
        if len(calls) == 1:
            return httpx.Response(503, text="busy")
        body = json.loads(request.content)
        assert body == {"model": "m", "input": "hello"}
        return httpx.Response(200, json={"data": [{"embedding": [3.0, 4.0]}]})

    emb = RemoteEmbedder("http://emb.test/v1/embeddings", "m", api_key_env="EMB_KEY", client=_client(handler), sleep=lambda s: None)
    v = emb.embed("hello")
    assert v.tolist() == [0.6, 0.8]
    assert calls[-1].headers["authorization"] == "Bearer secret"
    assert len(calls) == 2
    emb.embed("hello")
    assert len(calls) == 2  # memoised


def test_remote_embedder_bare_array():
    emb = RemoteEmbedder("http://e", client=_client(lambda r: httpx.Response(200, json=[1.0, 0.0])), sleep=lambda s: None)
    assert emb.embed("x").tolist() == [1.0, 0.0]


def test_remote_embedder_gives_up():
    emb = RemoteEmbedder("http://e", retries=2, client=_client(lambda r: httpx.Response(500)), sleep=lambda s: None)
    with pytest.raises(EmbeddingBackendError) as err:
        emb.embed("x")
    assert err.value.attempts == 3 and err.value.status == 500


def test_remote_embedder_client_error_not_retried():
    n = []

    def handler(request):
        n.append(1)
        return httpx.Response(401, text="no")

    emb = RemoteEmbedder("http://e", retries=3, client=_client(handler), sleep=lambda s: None)
    with pytest.raises(EmbeddingBackendError):
        emb.embed("x")
    assert len(n) == 1
