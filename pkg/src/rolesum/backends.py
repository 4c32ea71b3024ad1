"""Clients for the four remote services (chat, token embeddings, entailment,
preference) plus a file-backed fixture store that replays canned responses for
offline, deterministic runs.

Wire formats (all POST, JSON in/out):

    chat    {"messages": [...], "temperature": f, "max_tokens": n} -> {"content": s, "usage"?: {...}}
    embed   {"text": s, "lang": s, "layers": [...]}                -> {"dim": n, "tokens": [...], "vectors": [[...], ...]}
    entail  {"premise": s, "hypothesis": s}                        -> {"support": f}
    prefer  {"dialogue": s, "summary": s}                          -> {"score": f}

Transport failures and 5xx responses are retried with exponential backoff;
4xx and malformed bodies are fatal. A client with max_retries=k makes exactly
k+1 attempts before giving up.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import httpx
import numpy as np

DEFAULT_TIMEOUT = 30.0
DEFAULT_MAX_RETRIES = 2
DEFAULT_BACKOFF_BASE = 0.25
DEFAULT_EMBED_LAYERS = (-1,)

KINDS = ("chat", "embed", "entail", "prefer")


class BackendError(RuntimeError):
    """Request could not be completed (after retries, where applicable)."""

    def __init__(self, message: str, kind: str | None = None, status: int | None = None):
        super().__init__(message)
        self.kind = kind
        self.status = status


class ProtocolError(BackendError):
    """The service answered, but the body does not match the wire format."""


class FixtureError(BackendError):
    """Fixture mode is active but no fixture covers the request."""


# ---------------------------------------------------------------------------
# request payloads


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[Mapping[str, str], ...]
    temperature: float = 0.0
    max_tokens: int = 1024

    def to_payload(self) -> dict:
        return {
            "messages": [dict(m) for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


def embed_payload(text: str, lang: str, layers: Sequence[int] = DEFAULT_EMBED_LAYERS) -> dict:
    return {"text": text, "lang": lang, "layers": list(layers)}


def entail_payload(premise: str, hypothesis: str) -> dict:
    return {"premise": premise, "hypothesis": hypothesis}


def prefer_payload(dialogue: str, summary: str) -> dict:
    return {"dialogue": dialogue, "summary": summary}


# ---------------------------------------------------------------------------
# fixture store


def canonical_request(payload: Mapping[str, Any]) -> str:
    """The canonical JSON text a request is keyed by: sorted keys, no spaces,
    raw (non-escaped) unicode."""
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def request_key(payload: Mapping[str, Any]) -> str:
    digest = hashlib.sha256(canonical_request(payload).encode("utf-8")).hexdigest()
    return digest[:16]


def _one_hot(index: int, dim: int) -> list[float]:
    row = [0.0] * dim
    row[index] = 1.0
    return row


def _token_index(token: str, dim: int) -> int:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % dim


def _procedural_embed(config: Mapping[str, Any], payload: Mapping[str, Any]) -> dict:
    dim = int(config.get("dim", 8))
    text, lang = payload["text"], payload["lang"]
    if lang == "zh":
        tokens = [ch for ch in text if not ch.isspace()]
    else:
        tokens = text.split()
    vectors = [_one_hot(_token_index(tok, dim), dim) for tok in tokens]
    return {"dim": dim, "tokens": tokens, "vectors": vectors}


def _procedural_entail(config: Mapping[str, Any], payload: Mapping[str, Any]) -> dict:
    hit = payload["hypothesis"].strip() in payload["premise"]
    return {"support": 1.0 if hit else 0.0}


class FixtureStore:
    """Responses on disk, keyed by request content.

    Layout under the root directory:

        <kind>/<request_key>.json   exact response for one request
        <kind>.json                 procedural fallback config for a kind

    Exact files win. Procedural modes: chat/prefer support
    {"mode": "constant", ...}; embed supports {"mode": "orthonormal", "dim": n}
    (each token gets a one-hot vector chosen by hashing the token); entail
    supports {"mode": "sentence_match"} (support 1.0 iff the hypothesis occurs
    verbatim in the premise).
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path_for(self, kind: str, payload: Mapping[str, Any]) -> Path:
        return self.root / kind / f"{request_key(payload)}.json"

    def put(self, kind: str, payload: Mapping[str, Any], response: Mapping[str, Any]) -> Path:
        path = self.path_for(kind, payload)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(response, ensure_ascii=False, sort_keys=True), encoding="utf-8")
        return path

    def get(self, kind: str, payload: Mapping[str, Any]) -> dict:
        path = self.path_for(kind, payload)
        if path.is_file():
            return json.loads(path.read_text(encoding="utf-8"))
        fallback = self.root / f"{kind}.json"
        if fallback.is_file():
            config = json.loads(fallback.read_text(encoding="utf-8"))
            return self._procedural(kind, config, payload)
        raise FixtureError(
            f"no fixture for this {kind} request (looked for {path})", kind=kind
        )

    def _procedural(self, kind: str, config: Mapping[str, Any], payload: Mapping[str, Any]) -> dict:
        mode = config.get("mode")
        if kind == "embed" and mode == "orthonormal":
            return _procedural_embed(config, payload)
        if kind == "entail" and mode == "sentence_match":
            return _procedural_entail(config, payload)
        if kind == "chat" and mode == "constant":
            return {"content": config["content"]}
        if kind == "prefer" and mode == "constant":
            return {"score": config["score"]}
        raise FixtureError(f"unsupported procedural mode {mode!r} for kind {kind!r}", kind=kind)


# ---------------------------------------------------------------------------
# HTTP plumbing


class _JSONBackend:
    kind: str = ""

    def __init__(
        self,
        endpoint: str = "",
        api_key: str | None = None,
        timeout: float = DEFAULT_TIMEOUT,
        max_retries: int = DEFAULT_MAX_RETRIES,
        backoff_base: float = DEFAULT_BACKOFF_BASE,
        fixtures: FixtureStore | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.fixtures = fixtures
        self._client: httpx.Client | None = None
        self._transport = transport

    def _http(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(timeout=self.timeout, transport=self._transport)
        return self._client

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
            self._client = None

    def _request(self, payload: Mapping[str, Any], endpoint: str | None = None) -> dict:
        if self.fixtures is not None:
            return self.fixtures.get(self.kind, payload)
        url = endpoint or self.endpoint
        if not url:
            raise BackendError(f"no endpoint configured for {self.kind}", kind=self.kind)
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        attempts = self.max_retries + 1
        last_error: str = ""
        for attempt in range(attempts):
            try:
                response = self._http().post(url, json=payload, headers=headers)
            except httpx.TransportError as exc:
                last_error = f"transport error: {exc}"
            else:
                if response.status_code < 400:
                    try:
                        body = response.json()
                    except ValueError as exc:
                        raise ProtocolError(
                            f"{self.kind}: response is not JSON: {exc}", kind=self.kind
                        ) from exc
                    if not isinstance(body, dict):
                        raise ProtocolError(
                            f"{self.kind}: expected a JSON object response", kind=self.kind
                        )
                    return body
                if response.status_code < 500:
                    raise BackendError(
                        f"{self.kind}: HTTP {response.status_code}: {response.text[:200]}",
                        kind=self.kind,
                        status=response.status_code,
                    )
                last_error = f"HTTP {response.status_code}"
            if attempt + 1 < attempts:
                time.sleep(self.backoff_base * (2**attempt))
        raise BackendError(
            f"{self.kind}: giving up after {attempts} attempts ({last_error})", kind=self.kind
        )


def _require(body: Mapping[str, Any], key: str, kind: str) -> Any:
    if key not in body:
        raise ProtocolError(f"{kind}: response missing {key!r}", kind=kind)
    return body[key]


def _unit_score(value: Any, kind: str, name: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ProtocolError(f"{kind}: {name} must be a number, got {value!r}", kind=kind)
    score = float(value)
    if not 0.0 <= score <= 1.0:
        raise ProtocolError(f"{kind}: {name} {score} outside [0, 1]", kind=kind)
    return score


# ---------------------------------------------------------------------------
# concrete clients


@dataclass(frozen=True)
class ChatResponse:
    content: str
    usage: Mapping[str, Any] | None = None


class ChatClient(_JSONBackend):
    kind = "chat"

    def chat(self, request: ChatRequest) -> ChatResponse:
        body = self._request(request.to_payload())
        content = _require(body, "content", self.kind)
        if not isinstance(content, str):
            raise ProtocolError(f"{self.kind}: content must be a string", kind=self.kind)
        usage = body.get("usage")
        if usage is not None and not isinstance(usage, dict):
            raise ProtocolError(f"{self.kind}: usage must be an object", kind=self.kind)
        return ChatResponse(content=content, usage=usage)


@dataclass(frozen=True)
class TokenEmbeddings:
    tokens: tuple[str, ...]
    vectors: np.ndarray  # shape (len(tokens), dim)

    def __post_init__(self) -> None:
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.tokens):
            raise ValueError("vectors must be one row per token")


class EmbeddingClient(_JSONBackend):
    """Token-embedding service. `endpoint` may be a single URL or a mapping
    from language tag to URL when en and zh are served by different models."""

    kind = "embed"

    def __init__(self, endpoint: str | Mapping[str, str] = "", layers: Sequence[int] = DEFAULT_EMBED_LAYERS, **kwargs):
        self._endpoints: dict[str, str] | None = None
        if isinstance(endpoint, Mapping):
            self._endpoints = dict(endpoint)
            endpoint = ""
        super().__init__(endpoint=endpoint, **kwargs)
        self.layers = tuple(layers)

    def _endpoint_for(self, lang: str) -> str | None:
        if self._endpoints is not None:
            if lang not in self._endpoints:
                raise BackendError(f"no embedding endpoint configured for lang {lang!r}", kind=self.kind)
            return self._endpoints[lang]
        return None

    def embed(self, text: str, lang: str) -> TokenEmbeddings:
        payload = embed_payload(text, lang, self.layers)
        body = self._request(payload, endpoint=self._endpoint_for(lang))
        dim = _require(body, "dim", self.kind)
        tokens = _require(body, "tokens", self.kind)
        vectors = _require(body, "vectors", self.kind)
        if not isinstance(dim, int) or dim <= 0:
            raise ProtocolError(f"{self.kind}: dim must be a positive integer", kind=self.kind)
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise ProtocolError(f"{self.kind}: tokens must be a list of strings", kind=self.kind)
        if not isinstance(vectors, list) or len(vectors) != len(tokens):
            raise ProtocolError(f"{self.kind}: need one vector per token", kind=self.kind)
        if vectors:
            matrix = np.array(vectors, dtype=np.float64)
            if matrix.ndim != 2 or matrix.shape != (len(tokens), dim):
                raise ProtocolError(
                    f"{self.kind}: vector shape {tuple(matrix.shape)} != ({len(tokens)}, {dim})",
                    kind=self.kind,
                )
        else:
            matrix = np.zeros((0, dim), dtype=np.float64)
        return TokenEmbeddings(tokens=tuple(tokens), vectors=matrix)


class EntailmentClient(_JSONBackend):
    """Premise/hypothesis support scorer. `languages` declares which input
    languages the backing model can judge."""

    kind = "entail"

    def __init__(self, endpoint: str = "", languages: Sequence[str] = ("en",), **kwargs):
        super().__init__(endpoint=endpoint, **kwargs)
        self.languages = frozenset(languages)

    def supports_language(self, lang: str) -> bool:
        return lang in self.languages

    def support(self, premise: str, hypothesis: str) -> float:
        body = self._request(entail_payload(premise, hypothesis))
        return _unit_score(_require(body, "support", self.kind), self.kind, "support")


class PreferenceClient(_JSONBackend):
    kind = "prefer"

    def score(self, dialogue: str, summary: str) -> float:
        body = self._request(prefer_payload(dialogue, summary))
        return _unit_score(_require(body, "score", self.kind), self.kind, "score")
