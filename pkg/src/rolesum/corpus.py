"""Dialogue dataset model, JSONL ingestion, split management, and the
reasoning-distillation pipeline.

Dataset files are JSONL, one object per line:

    {"id": "...", "turns": [{"speaker": "...", "text": "..."}, ...],
     "summary": "...", "think": "..."}   # think optional

``think`` carries the text *between* the think delimiters; the tags themselves
are a generation-format concern, not a storage one.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from . import prompts
from .backends import BackendError, ChatRequest
from .lang import LanguageTag

logger = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "validation", "test", "grpo_eval")

DISTILL_MAX_TOKENS = 2048


class CorpusError(ValueError):
    """Raised for malformed dataset files or violated dataset invariants."""


class FormatError(ValueError):
    """Raised when generated output violates the think-block format.

    kind is one of: missing, multiple, empty_trace, empty_summary.
    """

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


@dataclass(frozen=True)
class DialogueTurn:
    speaker: str
    text: str

    def __post_init__(self) -> None:
        if not self.speaker.strip():
            raise ValueError("turn speaker must be non-empty")
        if not self.text.strip():
            raise ValueError("turn text must be non-empty")


@dataclass(frozen=True)
class Dialogue:
    id: str
    turns: tuple[DialogueTurn, ...]
    language: LanguageTag | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("dialogue id must be non-empty")
        if not self.turns:
            raise ValueError(f"dialogue {self.id!r} has no turns")

    def render(self) -> str:
        """Serialize as one `Speaker: text` line per turn (the canonical form
        used in prompts and as the entailment premise)."""
        return "\n".join(f"{t.speaker}: {t.text}" for t in self.turns)


@dataclass(frozen=True)
class ReasoningTrace:
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("reasoning trace must be non-empty")
        if prompts.THINK_OPEN in self.text or prompts.THINK_CLOSE in self.text:
            raise ValueError("reasoning trace must not nest think delimiters")


@dataclass(frozen=True)
class AnnotatedExample:
    dialogue: Dialogue
    reference: str
    trace: ReasoningTrace | None = None

    def __post_init__(self) -> None:
        if not self.reference.strip():
            raise ValueError(f"example {self.dialogue.id!r} has an empty reference summary")

    @property
    def id(self) -> str:
        return self.dialogue.id


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    examples: tuple[AnnotatedExample, ...]

    def __post_init__(self) -> None:
        if self.name not in SPLIT_NAMES:
            raise ValueError(f"unknown split name {self.name!r}; expected one of {SPLIT_NAMES}")
        seen: set[str] = set()
        for ex in self.examples:
            if ex.id in seen:
                raise CorpusError(f"duplicate example id {ex.id!r} in split {self.name!r}")
            seen.add(ex.id)

    def __len__(self) -> int:
        return len(self.examples)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(ex.id for ex in self.examples)


def _example_from_record(record: dict, line_no: int) -> AnnotatedExample:
    if not isinstance(record, dict):
        raise CorpusError(f"line {line_no}: expected a JSON object, got {type(record).__name__}")
    for key in ("id", "turns", "summary"):
        if key not in record:
            raise CorpusError(f"line {line_no}: missing required field {key!r}")
    turns_raw = record["turns"]
    if not isinstance(turns_raw, list):
        raise CorpusError(f"line {line_no}: 'turns' must be an array")
    try:
        turns = tuple(DialogueTurn(t["speaker"], t["text"]) for t in turns_raw)
        dialogue = Dialogue(str(record["id"]), turns)
        trace = ReasoningTrace(record["think"]) if record.get("think") is not None else None
        return AnnotatedExample(dialogue, record["summary"], trace)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusError(f"line {line_no}: {exc}") from exc


def load_jsonl(path: str | Path) -> list[AnnotatedExample]:
    """Load examples from a JSONL dataset file, in file order.

    Raises CorpusError carrying the line number for malformed lines and naming
    the offending id for duplicates.
    """
    path = Path(path)
    examples: list[AnnotatedExample] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON: {exc.msg}") from exc
            example = _example_from_record(record, line_no)
            if example.id in seen:
                raise CorpusError(f"line {line_no}: duplicate example id {example.id!r}")
            seen.add(example.id)
            examples.append(example)
    return examples


def _example_to_record(example: AnnotatedExample) -> dict:
    record: dict = {
        "id": example.dialogue.id,
        "turns": [{"speaker": t.speaker, "text": t.text} for t in example.dialogue.turns],
        "summary": example.reference,
    }
    if example.trace is not None:
        record["think"] = example.trace.text
    return record


def write_jsonl(path: str | Path, examples: Iterable[AnnotatedExample]) -> None:
    """Write examples in the canonical JSONL form (stable key order, UTF-8)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for example in examples:
            fh.write(json.dumps(_example_to_record(example), ensure_ascii=False))
            fh.write("\n")


def load_split(path: str | Path, name: str) -> DatasetSplit:
    return DatasetSplit(name, tuple(load_jsonl(path)))


def load_dataset(manifest_path: str | Path) -> dict[str, DatasetSplit]:
    """Load a dataset manifest: JSON mapping split names to JSONL paths
    (relative paths resolve against the manifest's directory).

    Enforces that example ids are disjoint across splits.
    """
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    splits: dict[str, DatasetSplit] = {}
    claimed: dict[str, str] = {}
    for name in ("train", "validation", "test"):
        if name not in manifest:
            continue
        split_path = Path(manifest[name])
        if not split_path.is_absolute():
            split_path = manifest_path.parent / split_path
        split = load_split(split_path, name)
        for ex_id in split.ids:
            if ex_id in claimed:
                raise CorpusError(
                    f"example id {ex_id!r} appears in both {claimed[ex_id]!r} and {name!r}"
                )
            claimed[ex_id] = name
        splits[name] = split
    return splits


def make_grpo_eval_split(validation: DatasetSplit, n: int) -> DatasetSplit:
    """Take the first n validation examples, in order, as the GRPO eval split."""
    if n > len(validation):
        raise CorpusError(
            f"requested {n} evaluation examples but the validation split has only "
            f"{len(validation)}"
        )
    return DatasetSplit("grpo_eval", validation.examples[:n])


def build_distillation_prompt(example: AnnotatedExample) -> str:
    """Render the distillation prompt for one example: instructions plus the
    dialogue serialized as `Speaker: text` lines and the reference summary."""
    return prompts.render_distillation_prompt(example.dialogue.render(), example.reference)


def distillation_request(
    example: AnnotatedExample,
    temperature: float = 0.0,
    max_tokens: int = DISTILL_MAX_TOKENS,
) -> ChatRequest:
    """The exact chat request the distiller sends for an example (exposed so
    fixtures can be authored against identical request bytes)."""
    return ChatRequest(
        messages=({"role": "user", "content": build_distillation_prompt(example)},),
        temperature=temperature,
        max_tokens=max_tokens,
    )


def parse_distilled_output(raw: str) -> tuple[ReasoningTrace, str]:
    """Split teacher output into (trace, summary).

    The output must be exactly one think block followed by non-empty summary
    text; anything else raises FormatError with a kind describing the defect.
    """
    # "<think>" is not a substring of "</think>", so the two counts are independent.
    n_open = raw.count(prompts.THINK_OPEN)
    n_close = raw.count(prompts.THINK_CLOSE)
    if n_open == 0 and n_close == 0:
        raise FormatError("missing", "no think block found")
    if n_open > 1 or n_close > 1:
        raise FormatError("multiple", f"expected one think block, found {max(n_open, n_close)}")
    if n_open != n_close:
        raise FormatError("missing", "unbalanced think delimiters")
    start = raw.find(prompts.THINK_OPEN)
    end = raw.find(prompts.THINK_CLOSE)
    if end < start:
        raise FormatError("missing", "think delimiters out of order")
    if raw[:start].strip():
        raise FormatError("missing", "text precedes the think block")
    trace_text = raw[start + len(prompts.THINK_OPEN) : end].strip()
    if not trace_text:
        raise FormatError("empty_trace", "think block is empty")
    summary = raw[end + len(prompts.THINK_CLOSE) :].strip()
    if not summary:
        raise FormatError("empty_summary", "no summary text after the think block")
    return ReasoningTrace(trace_text), summary


def serialize_distilled_output(trace: ReasoningTrace, summary: str) -> str:
    """Inverse of parse_distilled_output, modulo surrounding whitespace."""
    return f"{prompts.THINK_OPEN}{trace.text}{prompts.THINK_CLOSE}\n{summary}"


def _distill_one(example, teacher, retries, temperature):
    request = distillation_request(example, temperature=temperature)
    for _attempt in range(retries + 1):
        try:
            response = teacher.chat(request)
        except BackendError as exc:
            raise CorpusError(f"example {example.id!r}: teacher call failed: {exc}") from exc
        try:
            trace, _summary = parse_distilled_output(response.content)
        except FormatError:
            continue
        return replace(example, trace=trace)
    logger.warning("example %r: teacher output stayed malformed after %d attempts; emitting without trace",
                   example.id, retries + 1)
    return replace(example, trace=None)


def distill_dataset(
    split: DatasetSplit,
    teacher,
    retries: int = 2,
    temperature: float = 0.0,
    max_workers: int = 1,
) -> DatasetSplit:
    """Augment every example with a teacher-generated reasoning trace.

    Outputs failing format validation are retried up to `retries` times, after
    which the example is emitted trace-less and a warning is logged. Teacher
    calls fan out across `max_workers` threads; output order always matches
    input order.
    """
    if max_workers <= 1:
        distilled = [_distill_one(ex, teacher, retries, temperature) for ex in split.examples]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            distilled = list(
                pool.map(lambda ex: _distill_one(ex, teacher, retries, temperature), split.examples)
            )
    return DatasetSplit(split.name, tuple(distilled))
