"""Backend client behavior: fixture replay, retry policy, wire validation."""

from __future__ import annotations

import hashlib
import json

import httpx
import numpy as np
import pytest

from rolesum.backends import (
    BackendError,
    ChatClient,
    ChatRequest,
    EmbeddingClient,
    EntailmentClient,
    FixtureError,
    FixtureStore,
    PreferenceClient,
    ProtocolError,
    canonical_request,
    embed_payload,
    entail_payload,
    prefer_payload,
    request_key,
)


class TestRequestKeys:
    def test_canonical_form_sorts_keys_and_keeps_unicode(self):
        assert canonical_request({"b": 1, "a": "好"}) == '{"a":"好","b":1}'

    def test_key_is_sha256_prefix(self):
        payload = {"x": 1}
        expected = hashlib.sha256(canonical_request(payload).encode("utf-8")).hexdigest()[:16]
        assert request_key(payload) == expected

    def test_key_order_independent(self):
        assert request_key({"a": 1, "b": 2}) == request_key({"b": 2, "a": 1})


class TestFixtureStore:
    def test_put_get_roundtrip(self, tmp_path):
        store = FixtureStore(tmp_path)
        payload = {"premise": "p", "hypothesis": "h"}
        store.put("entail", payload, {"support": 0.9})
        assert store.get("entail", payload) == {"support": 0.9}

    def test_missing_fixture_raises(self, tmp_path):
        with pytest.raises(FixtureError):
            FixtureStore(tmp_path).get("chat", {"messages": []})

    def test_exact_fixture_beats_procedural(self, tmp_path):
        (tmp_path / "prefer.json").write_text('{"mode": "constant", "score": 0.5}')
        store = FixtureStore(tmp_path)
        payload = prefer_payload("d", "s")
        store.put("prefer", payload, {"score": 0.9})
        assert store.get("prefer", payload)["score"] == 0.9
        assert store.get("prefer", prefer_payload("d", "other"))["score"] == 0.5

    def test_procedural_embed_is_orthonormal_one_hots(self, tmp_path):
        (tmp_path / "embed.json").write_text('{"mode": "orthonormal", "dim": 8}')
        store = FixtureStore(tmp_path)
        body = store.get("embed", embed_payload("alpha beta alpha", "en"))
        assert body["dim"] == 8
        assert body["tokens"] == ["alpha", "beta", "alpha"]
        vectors = np.array(body["vectors"])
        assert vectors.shape == (3, 8)
        assert ((vectors == 0.0) | (vectors == 1.0)).all()
        assert (vectors.sum(axis=1) == 1.0).all()
        # same token, same vector; deterministic across calls
        assert body["vectors"][0] == body["vectors"][2]
        assert store.get("embed", embed_payload("alpha beta alpha", "en")) == body

    def test_procedural_embed_zh_uses_characters(self, tmp_path):
        (tmp_path / "embed.json").write_text('{"mode": "orthonormal", "dim": 8}')
        body = FixtureStore(tmp_path).get("embed", embed_payload("你好 吗", "zh"))
        assert body["tokens"] == ["你", "好", "吗"]

    def test_procedural_entail_sentence_match(self, tmp_path):
        (tmp_path / "entail.json").write_text('{"mode": "sentence_match"}')
        store = FixtureStore(tmp_path)
        premise = "Amanda: I baked cookies."
        assert store.get("entail", entail_payload(premise, "I baked cookies."))["support"] == 1.0
        assert store.get("entail", entail_payload(premise, "I burned dinner."))["support"] == 0.0

    def test_procedural_chat_constant(self, tmp_path):
        (tmp_path / "chat.json").write_text('{"mode": "constant", "content": "hi"}')
        request = ChatRequest(messages=({"role": "user", "content": "x"},))
        assert FixtureStore(tmp_path).get("chat", request.to_payload()) == {"content": "hi"}

    def test_unknown_procedural_mode(self, tmp_path):
        (tmp_path / "chat.json").write_text('{"mode": "nonsense"}')
        with pytest.raises(FixtureError):
            FixtureStore(tmp_path).get("chat", {"messages": []})


def make_transport(handler):
    return httpx.MockTransport(handler)


class TestRetryPolicy:
    def _client(self, handler, **kwargs):
        kwargs.setdefault("max_retries", 2)
        return EntailmentClient(
            endpoint="http://svc/entail",
            backoff_base=0.0,
            transport=make_transport(handler),
            **kwargs,
        )

    def test_recovers_after_5xx(self):
        calls = []

        def handler(request):
            calls.append(request)
            if len(calls) < 3:
                return httpx.Response(500, text="boom")
            return httpx.Response(200, json={"support": 0.7})

        assert self._client(handler).support("p", "h") == 0.7
        assert len(calls) == 3

    def test_attempt_budget_is_retries_plus_one(self):
        calls = []

        def handler(request):
            calls.append(request)
            return httpx.Response(502, text="bad gateway")

        with pytest.raises(BackendError) as err:
            self._client(handler, max_retries=1).support("p", "h")
        assert len(calls) == 2
        assert "2 attempts" in str(err.value)

    def test_4xx_is_fatal_immediately(self):
        calls = []

        def handler(request):
            calls.append(request)
            return httpx.Response(403, text="denied")

        with pytest.raises(BackendError) as err:
            self._client(handler).support("p", "h")
        assert len(calls) == 1
        assert err.value.status == 403

    def test_transport_errors_retried(self):
        calls = []

        def handler(request):
            calls.append(request)
            if len(calls) == 1:
                raise httpx.ConnectError("refused")
            return httpx.Response(200, json={"support": 1.0})

        assert self._client(handler).support("p", "h") == 1.0
        assert len(calls) == 2

    def test_malformed_body_is_fatal_not_retried(self):
        calls = []

        def handler(request):
            calls.append(request)
            return httpx.Response(200, text="not json")

        with pytest.raises(ProtocolError):
            self._client(handler).support("p", "h")
        assert len(calls) == 1

    def test_api_key_sent_as_bearer(self):
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(200, json={"support": 0.5})

        self._client(handler, api_key="sk-test").support("p", "h")
        assert seen["auth"] == "Bearer sk-test"

    def test_no_endpoint_and_no_fixtures(self):
        with pytest.raises(BackendError):
            EntailmentClient().support("p", "h")


class TestChatClient:
    def test_payload_shape(self):
        request = ChatRequest(
            messages=({"role": "user", "content": "hi"},), temperature=0.5, max_tokens=64
        )
        assert request.to_payload() == {
            "messages": [{"role": "user", "content": "hi"}],
            "temperature": 0.5,
            "max_tokens": 64,
        }

    def test_chat_roundtrip_via_fixtures(self, tmp_path):
        store = FixtureStore(tmp_path)
        request = ChatRequest(messages=({"role": "user", "content": "hello"},))
        store.put("chat", request.to_payload(), {"content": "world", "usage": {"tokens": 2}})
        client = ChatClient(fixtures=store)
        response = client.chat(request)
        assert response.content == "world"
        assert response.usage == {"tokens": 2}

    def test_missing_content_rejected(self, tmp_path):
        store = FixtureStore(tmp_path)
        request = ChatRequest(messages=({"role": "user", "content": "hello"},))
        store.put("chat", request.to_payload(), {"reply": "nope"})
        with pytest.raises(ProtocolError):
            ChatClient(fixtures=store).chat(request)


class TestEmbeddingClient:
    def test_fixture_roundtrip(self, tmp_path):
        store = FixtureStore(tmp_path)
        payload = embed_payload("a b", "en")
        store.put("embed", payload, {"dim": 2, "tokens": ["a", "b"], "vectors": [[1, 0], [0, 1]]})
        result = EmbeddingClient(fixtures=store).embed("a b", "en")
        assert result.tokens == ("a", "b")
        assert result.vectors.shape == (2, 2)
        assert result.vectors.dtype == np.float64

    def test_vector_count_mismatch_rejected(self, tmp_path):
        store = FixtureStore(tmp_path)
        payload = embed_payload("a b", "en")
        store.put("embed", payload, {"dim": 2, "tokens": ["a", "b"], "vectors": [[1, 0]]})
        with pytest.raises(ProtocolError):
            EmbeddingClient(fixtures=store).embed("a b", "en")

    def test_vector_width_mismatch_rejected(self, tmp_path):
        store = FixtureStore(tmp_path)
        payload = embed_payload("a", "en")
        store.put("embed", payload, {"dim": 3, "tokens": ["a"], "vectors": [[1, 0]]})
        with pytest.raises(ProtocolError):
            EmbeddingClient(fixtures=store).embed("a", "en")

    def test_empty_text_allowed(self, tmp_path):
        store = FixtureStore(tmp_path)
        payload = embed_payload("", "en")
        store.put("embed", payload, {"dim": 4, "tokens": [], "vectors": []})
        result = EmbeddingClient(fixtures=store).embed("", "en")
        assert result.vectors.shape == (0, 4)

    def test_per_language_endpoints(self):
        hosts = []

        def handler(request):
            hosts.append(request.url.host)
            return httpx.Response(200, json={"dim": 1, "tokens": ["x"], "vectors": [[1.0]]})

        client = EmbeddingClient(
            endpoint={"en": "http://en-svc/embed", "zh": "http://zh-svc/embed"},
            transport=make_transport(handler),
        )
        client.embed("x", "en")
        client.embed("x", "zh")
        assert hosts == ["en-svc", "zh-svc"]
        with pytest.raises(BackendError):
            client.embed("x", "fr")

    def test_layers_in_payload(self):
        assert embed_payload("t", "en", (-1, -2)) == {"text": "t", "lang": "en", "layers": [-1, -2]}


class TestScoreClients:
    def test_entailment_range_enforced(self, tmp_path):
        store = FixtureStore(tmp_path)
        store.put("entail", entail_payload("p", "h"), {"support": 1.5})
        with pytest.raises(ProtocolError):
            EntailmentClient(fixtures=store).support("p", "h")

    def test_preference_score(self, tmp_path):
        store = FixtureStore(tmp_path)
        store.put("prefer", prefer_payload("d", "s"), {"score": 0.66})
        assert PreferenceClient(fixtures=store).score("d", "s") == 0.66

    def test_preference_non_numeric_rejected(self, tmp_path):
        store = FixtureStore(tmp_path)
        store.put("prefer", prefer_payload("d", "s"), {"score": "high"})
        with pytest.raises(ProtocolError):
            PreferenceClient(fixtures=store).score("d", "s")

    def test_language_capability_flag(self):
        client = EntailmentClient(languages=("en", "zh"))
        assert client.supports_language("zh")
        assert not client.supports_language("fr")


def test_negative_retries_rejected():
    with pytest.raises(ValueError):
        ChatClient(max_retries=-1)
