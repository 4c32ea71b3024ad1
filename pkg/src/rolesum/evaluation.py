"""Corpus evaluation: per-example quality metrics for predicted summaries and
the claim-level faithfulness pipeline.

Faithfulness of a summary against its source dialogue is measured by
decomposing the summary into atomic claims (chat backend), scoring each claim
against the rendered dialogue with the entailment backend, and reporting the
fraction of claims whose support clears the threshold.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import prompts
from .backends import ChatClient, ChatRequest, EmbeddingClient, EntailmentClient, PreferenceClient
from .corpus import CorpusError, DatasetSplit
from .lang import GreedyLexiconSegmenter, LanguageTag, detect_language, tokenize
from .lexical import length_reward, rouge_all
from .semantic import bertscore_f1

DEFAULT_SUPPORT_THRESHOLD = 0.5
DECOMPOSITION_MAX_TOKENS = 1024

METRIC_NAMES = ("rouge1", "rouge2", "rougeL", "length", "bertscore", "faithfulness", "preference")


class LanguageSupportError(RuntimeError):
    """A backend was asked to judge a language it does not support."""


# ---------------------------------------------------------------------------
# faithfulness


def decomposition_request(summary: str, max_tokens: int = DECOMPOSITION_MAX_TOKENS) -> ChatRequest:
    """The exact chat request used to split a summary into claims (exposed so
    fixtures can be authored against identical request bytes)."""
    return ChatRequest(
        messages=({"role": "user", "content": prompts.render_decomposition_prompt(summary)},),
        temperature=0.0,
        max_tokens=max_tokens,
    )


def parse_claims(content: str) -> list[str]:
    """One claim per non-empty line, whitespace-trimmed, order preserved."""
    return [line.strip() for line in content.splitlines() if line.strip()]


def decompose_claims(chat: ChatClient, summary: str) -> list[str]:
    return parse_claims(chat.chat(decomposition_request(summary)).content)


def faithfulness_score(supports: Sequence[float], threshold: float = DEFAULT_SUPPORT_THRESHOLD) -> float:
    """Fraction of claims with support >= threshold; vacuously 1.0 with no
    claims. Monotone non-increasing in the threshold."""
    if not supports:
        return 1.0
    supported = sum(1 for s in supports if s >= threshold)
    return supported / len(supports)


@dataclass(frozen=True)
class FaithfulnessResult:
    claims: tuple[str, ...]
    supports: tuple[float, ...]
    threshold: float
    score: float
    no_claims: bool

    def at_threshold(self, threshold: float) -> float:
        """Re-score the same supports against a different threshold."""
        return faithfulness_score(self.supports, threshold)


def evaluate_faithfulness(
    dialogue_text: str,
    summary: str,
    chat: ChatClient,
    entail: EntailmentClient,
    lang: LanguageTag = LanguageTag.EN,
    threshold: float = DEFAULT_SUPPORT_THRESHOLD,
) -> FaithfulnessResult:
    """Claim-level faithfulness of one summary against its dialogue.

    Refuses languages the entailment backend does not declare support for; a
    summary that decomposes into zero claims scores 1.0 with no_claims set.
    """
    if not entail.supports_language(lang.value):
        raise LanguageSupportError(
            f"entailment backend supports {sorted(entail.languages)}, "
            f"cannot judge {lang.value!r} input"
        )
    claims = decompose_claims(chat, summary)
    supports = tuple(entail.support(dialogue_text, claim) for claim in claims)
    return FaithfulnessResult(
        claims=tuple(claims),
        supports=supports,
        threshold=threshold,
        score=faithfulness_score(supports, threshold),
        no_claims=not claims,
    )


# ---------------------------------------------------------------------------
# prediction files


def load_predictions(path: str | Path) -> dict[str, str]:
    """Load predicted summaries from JSONL rows {"id": ..., "summary": ...}."""
    path = Path(path)
    predictions: dict[str, str] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON: {exc.msg}") from exc
            if not isinstance(record, dict) or "id" not in record or "summary" not in record:
                raise CorpusError(f"line {line_no}: expected an object with id and summary")
            if not isinstance(record["summary"], str):
                raise CorpusError(f"line {line_no}: summary must be a string")
            pred_id = str(record["id"])
            if pred_id in predictions:
                raise CorpusError(f"line {line_no}: duplicate prediction id {pred_id!r}")
            predictions[pred_id] = record["summary"]
    return predictions


def write_predictions(path: str | Path, predictions: Mapping[str, str]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for pred_id, summary in predictions.items():
            fh.write(json.dumps({"id": pred_id, "summary": summary}, ensure_ascii=False))
            fh.write("\n")


def match_predictions(split: DatasetSplit, predictions: Mapping[str, str]) -> None:
    """Require the prediction ids to cover the split exactly."""
    split_ids = set(split.ids)
    missing = sorted(split_ids - set(predictions))
    extra = sorted(set(predictions) - split_ids)
    problems = []
    if missing:
        problems.append(f"{len(missing)} ids missing (e.g. {missing[:5]})")
    if extra:
        problems.append(f"{len(extra)} unknown ids (e.g. {extra[:5]})")
    if problems:
        raise CorpusError("predictions do not match the split: " + "; ".join(problems))


# ---------------------------------------------------------------------------
# evaluator


@dataclass(frozen=True)
class ExampleEval:
    id: str
    lang: str
    metrics: Mapping[str, float | None]


@dataclass(frozen=True)
class EvalReport:
    split: str
    examples: tuple[ExampleEval, ...]
    means: Mapping[str, float]
    counts: Mapping[str, int]
    languages: Mapping[str, int]
    threshold: float
    skipped_faithfulness: tuple[str, ...] = ()
    metadata: Mapping[str, str] = field(default_factory=dict)

    @property
    def degraded(self) -> bool:
        return bool(self.skipped_faithfulness)


class Evaluator:
    """Scores predictions against a split's references.

    ROUGE and the length reward are always computed; bertscore, faithfulness,
    and preference are computed when their backends are wired. When the
    entailment backend cannot judge an example's language, faithfulness either
    raises (on_unsupported="error", the default) or records None for that
    example and flags the report (on_unsupported="skip").
    """

    def __init__(
        self,
        embedder: EmbeddingClient | None = None,
        chat: ChatClient | None = None,
        entail: EntailmentClient | None = None,
        prefer: PreferenceClient | None = None,
        segmenter: GreedyLexiconSegmenter | None = None,
        cjk_threshold: float | None = None,
        threshold: float = DEFAULT_SUPPORT_THRESHOLD,
        on_unsupported: str = "error",
    ):
        if on_unsupported not in ("error", "skip"):
            raise ValueError("on_unsupported must be 'error' or 'skip'")
        self.embedder = embedder
        self.chat = chat
        self.entail = entail
        self.prefer = prefer
        self.segmenter = segmenter
        self.cjk_threshold = cjk_threshold
        self.threshold = threshold
        self.on_unsupported = on_unsupported

    @property
    def faithfulness_enabled(self) -> bool:
        return self.chat is not None and self.entail is not None

    def _detect(self, reference: str) -> LanguageTag:
        if self.cjk_threshold is None:
            return detect_language(reference)
        return detect_language(reference, cjk_threshold=self.cjk_threshold)

    def evaluate_example(self, example, summary: str) -> ExampleEval:
        lang = self._detect(example.reference)
        ref_tokens = tokenize(example.reference, lang, segmenter=self.segmenter)
        cand_tokens = tokenize(summary, lang, segmenter=self.segmenter)

        metrics: dict[str, float | None] = {
            name: score.f1 for name, score in rouge_all(cand_tokens.tokens, ref_tokens.tokens).items()
        }
        metrics["length"] = length_reward(len(cand_tokens), len(ref_tokens))

        if self.embedder is not None:
            ref_emb = self.embedder.embed(example.reference, lang.value)
            cand_emb = self.embedder.embed(summary, lang.value)
            metrics["bertscore"] = bertscore_f1(cand_emb.vectors, ref_emb.vectors)

        if self.faithfulness_enabled:
            if not self.entail.supports_language(lang.value):
                if self.on_unsupported == "error":
                    raise LanguageSupportError(
                        f"example {example.id!r}: entailment backend supports "
                        f"{sorted(self.entail.languages)}, cannot judge {lang.value!r}"
                    )
                metrics["faithfulness"] = None
            else:
                result = evaluate_faithfulness(
                    example.dialogue.render(), summary, self.chat, self.entail,
                    lang=lang, threshold=self.threshold,
                )
                metrics["faithfulness"] = result.score

        if self.prefer is not None:
            metrics["preference"] = self.prefer.score(example.dialogue.render(), summary)

        return ExampleEval(id=example.id, lang=lang.value, metrics=metrics)

    def evaluate_split(
        self,
        split: DatasetSplit,
        predictions: Mapping[str, str],
        max_workers: int = 1,
        metadata: Mapping[str, str] | None = None,
    ) -> EvalReport:
        if not split.examples:
            raise ValueError(f"split {split.name!r} is empty")
        match_predictions(split, predictions)

        def one(example):
            return self.evaluate_example(example, predictions[example.id])

        if max_workers <= 1:
            rows = [one(ex) for ex in split.examples]
        else:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                rows = list(pool.map(one, split.examples))

        sums: dict[str, list[float]] = {}
        languages: dict[str, int] = {}
        skipped: list[str] = []
        for row in rows:
            languages[row.lang] = languages.get(row.lang, 0) + 1
            for name, value in row.metrics.items():
                if value is None:
                    if name == "faithfulness":
                        skipped.append(row.id)
                    continue
                sums.setdefault(name, []).append(value)
        means = {name: math.fsum(values) / len(values) for name, values in sorted(sums.items())}
        counts = {name: len(values) for name, values in sorted(sums.items())}

        return EvalReport(
            split=split.name,
            examples=tuple(rows),
            means=means,
            counts=counts,
            languages=dict(sorted(languages.items())),
            threshold=self.threshold,
            skipped_faithfulness=tuple(skipped),
            metadata=dict(metadata or {}),
        )


def report_to_dict(report: EvalReport) -> dict:
    return {
        "split": report.split,
        "threshold": report.threshold,
        "languages": dict(report.languages),
        "means": dict(report.means),
        "counts": dict(report.counts),
        "skipped_faithfulness": list(report.skipped_faithfulness),
        "metadata": dict(report.metadata),
        "examples": [
            {"id": row.id, "lang": row.lang, "metrics": dict(row.metrics)}
            for row in report.examples
        ],
    }


def write_report(path: str | Path, report: EvalReport) -> None:
    """Serialize a report as stable JSON: sorted keys, fixed float repr, no
    environment-dependent fields unless supplied via metadata."""
    Path(path).write_text(
        json.dumps(report_to_dict(report), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
