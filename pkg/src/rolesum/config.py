"""Run configuration: defaults, YAML file, environment variables, and CLI
overrides, in ascending precedence (CLI flag > env var > file > default).

Environment variables cover backend wiring only:

    ROLESUM_CHAT_ENDPOINT    ROLESUM_CHAT_API_KEY
    ROLESUM_EMBED_ENDPOINT   ROLESUM_EMBED_API_KEY
    ROLESUM_ENTAIL_ENDPOINT  ROLESUM_ENTAIL_API_KEY
    ROLESUM_PREFER_ENDPOINT  ROLESUM_PREFER_API_KEY
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .backends import (
    DEFAULT_BACKOFF_BASE,
    DEFAULT_MAX_RETRIES,
    DEFAULT_TIMEOUT,
    ChatClient,
    EmbeddingClient,
    EntailmentClient,
    FixtureStore,
    PreferenceClient,
)
from .evaluation import DEFAULT_SUPPORT_THRESHOLD, Evaluator
from .lang import DEFAULT_CJK_THRESHOLD, GreedyLexiconSegmenter
from .rewards import RewardEngine, RewardWeights

ENV_PREFIX = "ROLESUM"
BACKEND_KINDS = ("chat", "embed", "entail", "prefer")


class ConfigError(ValueError):
    """Malformed configuration file or option values."""


@dataclass(frozen=True)
class BackendSettings:
    endpoint: str | Mapping[str, str] = ""  # embed accepts {lang: url}
    api_key: str | None = None
    timeout: float = DEFAULT_TIMEOUT
    max_retries: int = DEFAULT_MAX_RETRIES
    backoff_base: float = DEFAULT_BACKOFF_BASE
    languages: tuple[str, ...] = ("en",)  # consulted for entail only

    @property
    def configured(self) -> bool:
        return bool(self.endpoint)


@dataclass(frozen=True)
class Config:
    chat: BackendSettings = field(default_factory=BackendSettings)
    embed: BackendSettings = field(default_factory=BackendSettings)
    entail: BackendSettings = field(default_factory=BackendSettings)
    prefer: BackendSettings = field(default_factory=BackendSettings)
    weights: RewardWeights = field(default_factory=RewardWeights)
    cjk_threshold: float = DEFAULT_CJK_THRESHOLD
    lexicon: str | None = None
    support_threshold: float = DEFAULT_SUPPORT_THRESHOLD
    on_unsupported: str = "error"
    judge_temperature: float = 0.0
    distill_retries: int = 2
    workers: int = 1
    fixtures: str | None = None


def _check_keys(section: Mapping[str, Any], allowed: tuple[str, ...], where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}; allowed: {sorted(allowed)}")


def _backend_settings(raw: Mapping[str, Any], kind: str) -> BackendSettings:
    _check_keys(raw, ("endpoint", "api_key", "timeout", "max_retries", "backoff_base", "languages"),
                f"backends.{kind}")
    endpoint = raw.get("endpoint", "")
    if isinstance(endpoint, Mapping):
        if kind != "embed":
            raise ConfigError(f"backends.{kind}.endpoint must be a single URL")
        endpoint = {str(k): str(v) for k, v in endpoint.items()}
    languages = raw.get("languages", ("en",))
    if isinstance(languages, str):
        languages = (languages,)
    return BackendSettings(
        endpoint=endpoint,
        api_key=raw.get("api_key"),
        timeout=float(raw.get("timeout", DEFAULT_TIMEOUT)),
        max_retries=int(raw.get("max_retries", DEFAULT_MAX_RETRIES)),
        backoff_base=float(raw.get("backoff_base", DEFAULT_BACKOFF_BASE)),
        languages=tuple(str(l) for l in languages),
    )


def _parse_file(path: Path) -> Config:
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    _check_keys(
        raw,
        ("backends", "weights", "lang", "eval", "judge", "distill", "workers", "fixtures"),
        str(path),
    )

    kwargs: dict[str, Any] = {}

    backends = raw.get("backends", {}) or {}
    _check_keys(backends, BACKEND_KINDS, "backends")
    for kind in BACKEND_KINDS:
        if kind in backends:
            kwargs[kind] = _backend_settings(backends[kind] or {}, kind)

    if "weights" in raw:
        weights = raw["weights"] or {}
        _check_keys(weights, ("bertscore", "rouge", "length", "principle"), "weights")
        kwargs["weights"] = replace(RewardWeights(), **{k: float(v) for k, v in weights.items()})

    lang = raw.get("lang", {}) or {}
    _check_keys(lang, ("cjk_threshold", "lexicon"), "lang")
    if "cjk_threshold" in lang:
        kwargs["cjk_threshold"] = float(lang["cjk_threshold"])
    if lang.get("lexicon"):
        lexicon = Path(lang["lexicon"])
        if not lexicon.is_absolute():
            lexicon = path.parent / lexicon
        kwargs["lexicon"] = str(lexicon)

    ev = raw.get("eval", {}) or {}
    _check_keys(ev, ("support_threshold", "on_unsupported"), "eval")
    if "support_threshold" in ev:
        kwargs["support_threshold"] = float(ev["support_threshold"])
    if "on_unsupported" in ev:
        if ev["on_unsupported"] not in ("error", "skip"):
            raise ConfigError("eval.on_unsupported must be 'error' or 'skip'")
        kwargs["on_unsupported"] = ev["on_unsupported"]

    judge = raw.get("judge", {}) or {}
    _check_keys(judge, ("temperature",), "judge")
    if "temperature" in judge:
        kwargs["judge_temperature"] = float(judge["temperature"])

    distill = raw.get("distill", {}) or {}
    _check_keys(distill, ("retries",), "distill")
    if "retries" in distill:
        kwargs["distill_retries"] = int(distill["retries"])

    if "workers" in raw:
        kwargs["workers"] = int(raw["workers"])
    if raw.get("fixtures"):
        fixtures = Path(raw["fixtures"])
        if not fixtures.is_absolute():
            fixtures = path.parent / fixtures
        kwargs["fixtures"] = str(fixtures)

    return Config(**kwargs)


def _apply_env(config: Config, env: Mapping[str, str]) -> Config:
    updates: dict[str, BackendSettings] = {}
    for kind in BACKEND_KINDS:
        settings = getattr(config, kind)
        endpoint = env.get(f"{ENV_PREFIX}_{kind.upper()}_ENDPOINT")
        api_key = env.get(f"{ENV_PREFIX}_{kind.upper()}_API_KEY")
        if endpoint is not None:
            settings = replace(settings, endpoint=endpoint)
        if api_key is not None:
            settings = replace(settings, api_key=api_key)
        updates[kind] = settings
    return replace(config, **updates)


def load_config(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    **overrides: Any,
) -> Config:
    """Resolve the effective configuration. `overrides` are field=value pairs
    from CLI flags and win over both the file and the environment; None
    overrides are ignored."""
    config = _parse_file(Path(path)) if path else Config()
    config = _apply_env(config, os.environ if env is None else env)
    cleaned = {k: v for k, v in overrides.items() if v is not None}
    if cleaned:
        config = replace(config, **cleaned)
    return config


# ---------------------------------------------------------------------------
# builders


def build_fixtures(config: Config) -> FixtureStore | None:
    return FixtureStore(config.fixtures) if config.fixtures else None


def _client_kwargs(settings: BackendSettings, fixtures: FixtureStore | None) -> dict:
    return {
        "api_key": settings.api_key,
        "timeout": settings.timeout,
        "max_retries": settings.max_retries,
        "backoff_base": settings.backoff_base,
        "fixtures": fixtures,
    }


def build_clients(config: Config) -> dict[str, Any]:
    """Construct the four clients. With a fixture store every client exists
    (no endpoint needed); otherwise a kind without an endpoint maps to None."""
    fixtures = build_fixtures(config)
    clients: dict[str, Any] = {}

    def make(kind: str, cls, **extra):
        settings: BackendSettings = getattr(config, kind)
        if not settings.configured and fixtures is None:
            return None
        return cls(endpoint=settings.endpoint, **extra, **_client_kwargs(settings, fixtures))

    clients["chat"] = make("chat", ChatClient)
    clients["embed"] = make("embed", EmbeddingClient)
    clients["entail"] = make("entail", EntailmentClient, languages=config.entail.languages)
    clients["prefer"] = make("prefer", PreferenceClient)
    return clients


def build_segmenter(config: Config) -> GreedyLexiconSegmenter | None:
    if not config.lexicon:
        return None
    return GreedyLexiconSegmenter.from_file(config.lexicon)


def build_engine(config: Config) -> RewardEngine:
    clients = build_clients(config)
    return RewardEngine(
        weights=config.weights,
        embedder=clients["embed"],
        judge=clients["chat"],
        segmenter=build_segmenter(config),
        cjk_threshold=config.cjk_threshold,
        judge_temperature=config.judge_temperature,
    )


def build_evaluator(config: Config) -> Evaluator:
    clients = build_clients(config)
    return Evaluator(
        embedder=clients["embed"],
        chat=clients["chat"],
        entail=clients["entail"],
        prefer=clients["prefer"],
        segmenter=build_segmenter(config),
        cjk_threshold=config.cjk_threshold,
        threshold=config.support_threshold,
        on_unsupported=config.on_unsupported,
    )
