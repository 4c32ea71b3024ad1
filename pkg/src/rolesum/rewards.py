"""Group-wise reward scoring: per-candidate component rewards, their weighted
combination, and group-normalized advantages.

For a group of G candidate summaries of one dialogue, each candidate i gets

    R_i = w_b * bertscore_i + w_r * rouge_i + w_l * length_i + w_p * principle_i

and its advantage is the group z-score (r_i - mean) / (std + eps) with the
population standard deviation. Sums use math.fsum, so rewards and advantages
do not depend on candidate order beyond their own positions.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import prompts
from .backends import BackendError, ChatClient, ChatRequest, EmbeddingClient
from .corpus import CorpusError, Dialogue, DialogueTurn
from .lang import GreedyLexiconSegmenter, detect_language, tokenize
from .lexical import length_reward, rouge_reward
from .semantic import bertscore_f1

logger = logging.getLogger(__name__)

ADVANTAGE_EPS = 1e-8
DEFAULT_GROUP_SIZE = 4
JUDGE_MAX_TOKENS = 1024
COMPONENT_NAMES = ("bertscore", "rouge", "length", "principle")


@dataclass(frozen=True)
class RewardWeights:
    bertscore: float = 1.0
    rouge: float = 0.5
    length: float = 0.3
    principle: float = 1.0

    def __post_init__(self) -> None:
        for name in COMPONENT_NAMES:
            if getattr(self, name) < 0:
                raise ValueError(f"weight {name} must be non-negative")


DEFAULT_WEIGHTS = RewardWeights()


@dataclass(frozen=True)
class RewardComponents:
    bertscore: float
    rouge: float
    length: float
    principle: float

    def __post_init__(self) -> None:
        for name in COMPONENT_NAMES:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"component {name}={value} outside [0, 1]")

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in COMPONENT_NAMES}


def base_reward(components: RewardComponents, weights: RewardWeights = DEFAULT_WEIGHTS) -> float:
    """Weighted sum of the four components, correctly rounded (fsum)."""
    return math.fsum(
        getattr(weights, name) * getattr(components, name) for name in COMPONENT_NAMES
    )


def group_stats(rewards: Sequence[float]) -> tuple[float, float]:
    """(mean, population standard deviation) of a reward group."""
    if not rewards:
        raise ValueError("reward group is empty")
    n = len(rewards)
    mean = math.fsum(rewards) / n
    variance = math.fsum((r - mean) ** 2 for r in rewards) / n
    return mean, math.sqrt(variance)


def group_advantages(rewards: Sequence[float], eps: float = ADVANTAGE_EPS) -> list[float]:
    """Group z-scores. A constant group (all rewards equal) gets exactly zero
    advantages; the equality test runs on the inputs so float noise in the
    mean cannot leak through."""
    if not rewards:
        raise ValueError("reward group is empty")
    if min(rewards) == max(rewards):
        return [0.0] * len(rewards)
    mean, std = group_stats(rewards)
    return [(r - mean) / (std + eps) for r in rewards]


# ---------------------------------------------------------------------------
# principle judging


class JudgeFormatError(ValueError):
    """The judge reply is not the required JSON verdict."""

    def __init__(self, message: str, content: str = ""):
        super().__init__(message)
        self.content = content


def candidate_labels(n: int) -> list[str]:
    return [f"model-{i}" for i in range(1, n + 1)]


@dataclass(frozen=True)
class JudgeVerdict:
    scores: tuple[float, ...]  # normalized to [0, 1], in candidate order
    ranking: tuple[str, ...] | None = None  # labels, best first


def parse_judge_verdict(content: str, n_candidates: int) -> JudgeVerdict:
    """Strictly parse a judge reply: a single JSON object whose "scores" maps
    exactly the expected labels to values on the 1-5 scale (normalized here to
    (s-1)/4), with an optional "best-to-worst" list that must be a permutation
    of the labels."""
    try:
        verdict = json.loads(content)
    except json.JSONDecodeError as exc:
        raise JudgeFormatError(f"verdict is not valid JSON: {exc.msg}", content) from exc
    if not isinstance(verdict, dict):
        raise JudgeFormatError("verdict must be a JSON object", content)
    raw_scores = verdict.get("scores")
    if not isinstance(raw_scores, dict):
        raise JudgeFormatError('verdict must carry a "scores" object', content)
    labels = candidate_labels(n_candidates)
    if set(raw_scores) != set(labels):
        raise JudgeFormatError(
            f"scores must cover exactly {labels}, got {sorted(raw_scores)}", content
        )
    normalized: list[float] = []
    for label in labels:
        value = raw_scores[label]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise JudgeFormatError(f"score for {label} must be a number", content)
        if not 1 <= value <= 5:
            raise JudgeFormatError(f"score for {label} must be on the 1-5 scale", content)
        normalized.append((value - 1) / 4)
    ranking = None
    if "best-to-worst" in verdict:
        raw_rank = verdict["best-to-worst"]
        if (
            not isinstance(raw_rank, list)
            or not all(isinstance(item, str) for item in raw_rank)
            or sorted(raw_rank) != sorted(labels)
        ):
            raise JudgeFormatError(
                '"best-to-worst" must be a permutation of the candidate labels', content
            )
        ranking = tuple(raw_rank)
    return JudgeVerdict(scores=tuple(normalized), ranking=ranking)


def judge_request(
    dialogue_text: str,
    candidates: Sequence[str],
    temperature: float = 0.0,
    max_tokens: int = JUDGE_MAX_TOKENS,
) -> ChatRequest:
    """The exact chat request sent to the judge for one candidate group
    (exposed so fixtures can be authored against identical request bytes)."""
    return ChatRequest(
        messages=(
            {"role": "system", "content": prompts.JUDGE_SYSTEM_PROMPT},
            {"role": "user", "content": prompts.render_judge_user_prompt(dialogue_text, list(candidates))},
        ),
        temperature=temperature,
        max_tokens=max_tokens,
    )


def judge_repair_request(original: ChatRequest, bad_reply: str) -> ChatRequest:
    """Follow-up request after an unparseable verdict: the bad reply goes back
    as assistant context, followed by the repair instruction."""
    return ChatRequest(
        messages=original.messages
        + (
            {"role": "assistant", "content": bad_reply},
            {"role": "user", "content": prompts.JUDGE_REPAIR_PROMPT},
        ),
        temperature=original.temperature,
        max_tokens=original.max_tokens,
    )


def principle_scores(
    judge: ChatClient,
    dialogue_text: str,
    candidates: Sequence[str],
    temperature: float = 0.0,
) -> JudgeVerdict:
    """Score a candidate group with the judge. A malformed verdict triggers
    exactly one repair re-prompt; if that reply is malformed too, the second
    JudgeFormatError propagates."""
    request = judge_request(dialogue_text, candidates, temperature=temperature)
    reply = judge.chat(request)
    try:
        return parse_judge_verdict(reply.content, len(candidates))
    except JudgeFormatError as first:
        logger.warning("judge verdict unparseable (%s); re-prompting once", first)
    retry_reply = judge.chat(judge_repair_request(request, reply.content))
    return parse_judge_verdict(retry_reply.content, len(candidates))


# ---------------------------------------------------------------------------
# candidate groups and the scoring engine


@dataclass(frozen=True)
class CandidateGroup:
    dialogue: Dialogue
    reference: str
    candidates: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.reference.strip():
            raise ValueError(f"group {self.dialogue.id!r} has an empty reference")
        if not self.candidates:
            raise ValueError(f"group {self.dialogue.id!r} has no candidates")

    @property
    def dialogue_id(self) -> str:
        return self.dialogue.id


def load_groups(path: str | Path) -> list[CandidateGroup]:
    """Load candidate groups from JSONL: one object per line with dialogue_id,
    dialogue (turn list), reference, and candidates."""
    path = Path(path)
    groups: list[CandidateGroup] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON: {exc.msg}") from exc
            try:
                turns = tuple(DialogueTurn(t["speaker"], t["text"]) for t in record["dialogue"])
                group = CandidateGroup(
                    dialogue=Dialogue(str(record["dialogue_id"]), turns),
                    reference=record["reference"],
                    candidates=tuple(record["candidates"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"line {line_no}: {exc}") from exc
            if group.dialogue_id in seen:
                raise CorpusError(f"line {line_no}: duplicate dialogue_id {group.dialogue_id!r}")
            seen.add(group.dialogue_id)
            groups.append(group)
    return groups


def write_groups(path: str | Path, groups: Iterable[CandidateGroup]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for group in groups:
            record = {
                "dialogue_id": group.dialogue_id,
                "dialogue": [{"speaker": t.speaker, "text": t.text} for t in group.dialogue.turns],
                "reference": group.reference,
                "candidates": list(group.candidates),
            }
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")


class ComponentError(RuntimeError):
    """A component could not be scored; names the component and, when the
    failure is specific to one candidate, its index."""

    def __init__(self, component: str, message: str, candidate_index: int | None = None,
                 dialogue_id: str | None = None):
        where = f" (candidate {candidate_index})" if candidate_index is not None else ""
        who = f" [group {dialogue_id}]" if dialogue_id else ""
        super().__init__(f"{component}{where}{who}: {message}")
        self.component = component
        self.candidate_index = candidate_index
        self.dialogue_id = dialogue_id


@dataclass(frozen=True)
class CandidateScore:
    components: RewardComponents
    base: float
    advantage: float


@dataclass(frozen=True)
class GroupResult:
    dialogue_id: str
    scores: tuple[CandidateScore, ...]
    mean: float  # group mean of base rewards
    std: float  # population std of base rewards
    ranking: tuple[str, ...] | None = None  # judge's best-to-worst, when available


def group_result_rows(result: GroupResult) -> list[dict]:
    """Flatten a result to output rows (one per candidate) in the canonical
    key order."""
    return [
        {
            "dialogue_id": result.dialogue_id,
            "candidate_index": i,
            "components": score.components.as_dict(),
            "base": score.base,
            "advantage": score.advantage,
        }
        for i, score in enumerate(result.scores)
    ]


class RewardEngine:
    """Scores candidate groups against their reference summaries.

    Components whose weight is zero are skipped entirely (no backend call), so
    e.g. a run without an entailment-capable judge for the group's language can
    drop the principle term by zeroing its weight.
    """

    def __init__(
        self,
        weights: RewardWeights = DEFAULT_WEIGHTS,
        embedder: EmbeddingClient | None = None,
        judge: ChatClient | None = None,
        segmenter: GreedyLexiconSegmenter | None = None,
        cjk_threshold: float | None = None,
        eps: float = ADVANTAGE_EPS,
        judge_temperature: float = 0.0,
    ):
        self.weights = weights
        self.embedder = embedder
        self.judge = judge
        self.segmenter = segmenter
        self.cjk_threshold = cjk_threshold
        self.eps = eps
        self.judge_temperature = judge_temperature

    def _detect(self, reference: str):
        if self.cjk_threshold is None:
            return detect_language(reference)
        return detect_language(reference, cjk_threshold=self.cjk_threshold)

    def _require_backends(self, group: CandidateGroup) -> None:
        if self.weights.bertscore > 0 and self.embedder is None:
            raise ComponentError("bertscore", "no embedding backend configured",
                                 dialogue_id=group.dialogue_id)
        if self.weights.principle > 0 and self.judge is None:
            raise ComponentError("principle", "no judge backend configured",
                                 dialogue_id=group.dialogue_id)

    def score_group(self, group: CandidateGroup) -> GroupResult:
        # fail on missing backends before any network traffic
        self._require_backends(group)
        lang = self._detect(group.reference)
        ref_tokens = tokenize(group.reference, lang, segmenter=self.segmenter)

        n = len(group.candidates)
        verdict: JudgeVerdict | None = None
        if self.weights.principle > 0:
            try:
                verdict = principle_scores(
                    self.judge, group.dialogue.render(), group.candidates,
                    temperature=self.judge_temperature,
                )
            except (BackendError, JudgeFormatError) as exc:
                raise ComponentError("principle", str(exc), dialogue_id=group.dialogue_id) from exc
        principle = list(verdict.scores) if verdict else [0.0] * n

        ref_emb = None
        if self.weights.bertscore > 0:
            try:
                ref_emb = self.embedder.embed(group.reference, lang.value)
            except BackendError as exc:
                raise ComponentError("bertscore", str(exc), dialogue_id=group.dialogue_id) from exc

        bases: list[float] = []
        all_components: list[RewardComponents] = []
        for i, candidate in enumerate(group.candidates):
            cand_tokens = tokenize(candidate, lang, segmenter=self.segmenter)

            bert = 0.0
            if ref_emb is not None:
                try:
                    cand_emb = self.embedder.embed(candidate, lang.value)
                except BackendError as exc:
                    raise ComponentError("bertscore", str(exc), candidate_index=i,
                                         dialogue_id=group.dialogue_id) from exc
                # cosine can dip below zero on adversarial vectors; rewards floor at 0
                bert = min(1.0, max(0.0, bertscore_f1(cand_emb.vectors, ref_emb.vectors)))

            rouge = rouge_reward(cand_tokens.tokens, ref_tokens.tokens) if self.weights.rouge > 0 else 0.0

            length = 0.0
            if self.weights.length > 0:
                try:
                    length = length_reward(len(cand_tokens), len(ref_tokens))
                except ValueError as exc:
                    raise ComponentError("length", str(exc), candidate_index=i,
                                         dialogue_id=group.dialogue_id) from exc

            components = RewardComponents(
                bertscore=bert, rouge=rouge, length=length, principle=principle[i]
            )
            all_components.append(components)
            bases.append(base_reward(components, self.weights))

        mean, std = group_stats(bases)
        advantages = group_advantages(bases, eps=self.eps)
        scores = tuple(
            CandidateScore(components=c, base=b, advantage=a)
            for c, b, a in zip(all_components, bases, advantages)
        )
        return GroupResult(
            dialogue_id=group.dialogue_id,
            scores=scores,
            mean=mean,
            std=std,
            ranking=verdict.ranking if verdict else None,
        )

    def score_groups(self, groups: Sequence[CandidateGroup], max_workers: int = 1) -> list[GroupResult]:
        """Score many groups; results are returned in input order no matter
        how many worker threads run."""
        if max_workers <= 1:
            return [self.score_group(g) for g in groups]
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(self.score_group, groups))
