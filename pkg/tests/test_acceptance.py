"""End-to-end acceptance checks.

Each test is one acceptance check; the conftest terminal hook prints a
PASS/FAIL line per check at the end of the run. Oracles here are written
independently of the library code paths they validate (brute-force counting,
memoized recursion, direct formula expansion).
"""

from __future__ import annotations

import json
import math
import random
import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from conftest import make_dialogue, make_example
from rolesum import prompts
from rolesum.backends import ChatClient, EntailmentClient, FixtureStore
from rolesum.cli import main
from rolesum.corpus import (
    DatasetSplit,
    FormatError,
    ReasoningTrace,
    distillation_request,
    load_dataset,
    load_split,
    make_grpo_eval_split,
    parse_distilled_output,
    serialize_distilled_output,
)
from rolesum.evaluation import (
    Evaluator,
    LanguageSupportError,
    decomposition_request,
    evaluate_faithfulness,
    faithfulness_score,
    write_predictions,
)
from rolesum.lang import LanguageTag
from rolesum.lexical import rouge_l, rouge_n
from rolesum.rewards import (
    CandidateGroup,
    JudgeFormatError,
    RewardComponents,
    base_reward,
    group_advantages,
    judge_request,
    judge_repair_request,
    parse_judge_verdict,
    principle_scores,
    write_groups,
)
from rolesum.semantic import GreedyMatchScore, greedy_match


def test_acceptance_01_weighted_reward_matches_direct_sum():
    """1000 random component quadruples agree with the directly expanded
    weighted sum to 1e-12; the all-ones case lands exactly on the weight sum;
    the whole sweep stays under a second."""
    rng = random.Random(11)
    start = time.perf_counter()
    for _ in range(1000):
        b, r, l, p = rng.random(), rng.random(), rng.random(), rng.random()
        got = base_reward(RewardComponents(b, r, l, p))
        expected = 1.0 * b + 0.5 * r + 0.3 * l + 1.0 * p
        assert abs(got - expected) <= 1e-12
    assert base_reward(RewardComponents(1.0, 1.0, 1.0, 1.0)) == 2.8
    assert time.perf_counter() - start < 1.0


def test_acceptance_02_rouge_agrees_with_bruteforce_oracle():
    """On 200 random token pairs (length <= 12, alphabet of 6 symbols) the
    n-gram and LCS scores equal a brute-force oracle bit-for-bit, within a
    5-second budget."""

    def oracle_ngram(cand, ref, n):
        cand_grams = [tuple(cand[i : i + n]) for i in range(len(cand) - n + 1)]
        ref_grams = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
        matches = sum(min(cand_grams.count(g), ref_grams.count(g)) for g in set(cand_grams))
        return matches, len(cand_grams), len(ref_grams)

    def oracle_lcs(a, b):
        a, b = tuple(a), tuple(b)

        @lru_cache(maxsize=None)
        def longest(i, j):
            if i == len(a) or j == len(b):
                return 0
            if a[i] == b[j]:
                return 1 + longest(i + 1, j + 1)
            return max(longest(i + 1, j), longest(i, j + 1))

        return longest(0, 0)

    def check(score, matches, c_total, r_total):
        assert score.precision == (matches / c_total if c_total else 0.0)
        assert score.recall == (matches / r_total if r_total else 0.0)
        denom = c_total + r_total
        assert score.f1 == (2 * matches / denom if denom else 0.0)

    rng = random.Random(22)
    alphabet = "abcdef"
    start = time.perf_counter()
    for _ in range(200):
        cand = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        ref = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        for n in (1, 2):
            check(rouge_n(cand, ref, n), *oracle_ngram(cand, ref, n))
        check(rouge_l(cand, ref), oracle_lcs(cand, ref), len(cand), len(ref))
    assert time.perf_counter() - start < 5.0


def test_acceptance_03_greedy_match_reference_cases():
    """The 2x2 half-rotated case lands on 0.8536 within 1e-4, identical and
    orthogonal token sets score exactly 1 and 0, and scores are bit-identical
    under row permutations across 100 random matrices."""
    cand = np.array([[1.0, 0.0], [math.sqrt(0.5), math.sqrt(0.5)]])
    score = greedy_match(cand, np.eye(2))
    expected = (1.0 + math.sqrt(0.5)) / 2.0
    for value in (score.precision, score.recall, score.f1):
        assert abs(value - 0.8536) <= 1e-4
        assert abs(value - expected) <= 1e-12

    identity = np.eye(4)
    assert greedy_match(identity, identity) == GreedyMatchScore(1.0, 1.0, 1.0)
    assert greedy_match(np.eye(4)[:2], np.eye(4)[2:]) == GreedyMatchScore(0.0, 0.0, 0.0)

    rng = np.random.default_rng(33)
    for _ in range(100):
        c = rng.normal(size=(rng.integers(1, 7), 5))
        r = rng.normal(size=(rng.integers(1, 7), 5))
        c /= np.linalg.norm(c, axis=1, keepdims=True)
        r /= np.linalg.norm(r, axis=1, keepdims=True)
        base = greedy_match(c, r)
        shuffled = greedy_match(c[rng.permutation(len(c))], r[rng.permutation(len(r))])
        assert shuffled == base  # bit-exact


def test_acceptance_04_group_advantage_invariants():
    """Over 500 random groups (sizes 2/4/8) advantages sum to ~0; constant
    groups give exactly zero; shifting dyadic rewards leaves advantages
    bit-identical; positive scaling preserves the argmax; the worked group
    [1,2,3,2] matches its pinned z-scores."""
    rng = random.Random(44)
    for _ in range(500):
        size = rng.choice([2, 4, 8])
        rewards = [rng.uniform(0.0, 3.0) for _ in range(size)]
        assert abs(math.fsum(group_advantages(rewards))) <= 1e-9

    for size in (2, 4, 8):
        constant = [rng.uniform(0.0, 3.0)] * size
        assert group_advantages(constant) == [0.0] * size

    for _ in range(100):
        size = rng.choice([2, 4, 8])
        rewards = [rng.randrange(0, 65) / 16.0 for _ in range(size)]
        for shift in (0.25, 0.5, 1.0, 2.0):
            shifted = [r + shift for r in rewards]
            assert group_advantages(shifted) == group_advantages(rewards)
        for scale in (0.5, 2.0, 4.0):
            base = group_advantages(rewards)
            scaled = group_advantages([r * scale for r in rewards])
            assert max(range(size), key=base.__getitem__) == max(
                range(size), key=scaled.__getitem__
            )

    pinned = group_advantages([1.0, 2.0, 3.0, 2.0])
    assert pinned == pytest.approx([-1.4142, 0.0, 1.4142, 0.0], abs=1e-4)


def test_acceptance_05_judge_verdict_parsing_and_repair(tmp_path):
    """A fixture verdict maps 1-5 scores onto [0,1] quarters; a judge that
    stays unparseable gets exactly one repair re-prompt before
    JudgeFormatError; rankings that are not label permutations are rejected."""

    class CountingChat(ChatClient):
        calls = 0

        def chat(self, request):
            self.calls += 1
            return super().chat(request)

    dialogue = "A: hello\nB: hi there"
    candidates = ["first summary", "second summary"]
    request = judge_request(dialogue, candidates)

    good_dir = tmp_path / "good"
    store = FixtureStore(good_dir)
    store.put("chat", request.to_payload(), {"content": (
        '{"scores": {"model-1": 2, "model-2": 4}, '
        '"best-to-worst": ["model-2", "model-1"]}'
    )})
    judge = CountingChat(fixtures=store)
    verdict = principle_scores(judge, dialogue, candidates)
    assert verdict.scores == (0.25, 0.75)
    assert verdict.ranking == ("model-2", "model-1")
    assert judge.calls == 1

    bad_dir = tmp_path / "bad"
    store = FixtureStore(bad_dir)
    store.put("chat", request.to_payload(), {"content": "score: model-2 is best {"})
    repair = judge_repair_request(request, "score: model-2 is best {")
    store.put("chat", repair.to_payload(), {"content": "still not json"})
    judge = CountingChat(fixtures=store)
    with pytest.raises(JudgeFormatError):
        principle_scores(judge, dialogue, candidates)
    assert judge.calls == 2  # one original call, exactly one re-prompt

    with pytest.raises(JudgeFormatError):
        parse_judge_verdict(
            '{"scores": {"model-1": 2, "model-2": 4}, '
            '"best-to-worst": ["model-1", "model-1"]}',
            2,
        )


def test_acceptance_06_faithfulness_scoring_and_monotonicity(tmp_path):
    """Pinned support profiles score 0.75 / 1.0 / 0.5; zero claims are
    vacuously faithful end to end; raising the threshold never raises the
    score across 200 random support profiles."""
    assert faithfulness_score([0.9, 0.8, 0.2, 0.6], 0.5) == 0.75
    assert faithfulness_score([], 0.5) == 1.0
    assert faithfulness_score([0.4, 0.6], 0.5) == 0.5

    store = FixtureStore(tmp_path)
    store.put("chat", decomposition_request("empty summary").to_payload(), {"content": "\n"})
    (tmp_path / "entail.json").write_text('{"mode": "sentence_match"}')
    result = evaluate_faithfulness(
        "A: nothing happened.", "empty summary",
        ChatClient(fixtures=store), EntailmentClient(fixtures=store),
    )
    assert result.score == 1.0
    assert result.no_claims

    rng = random.Random(66)
    for _ in range(200):
        supports = [rng.random() for _ in range(rng.randint(0, 10))]
        lo, hi = sorted((rng.random(), rng.random()))
        assert faithfulness_score(supports, lo) >= faithfulness_score(supports, hi)


def test_acceptance_07_trace_format_roundtrip_and_rejection():
    """The template's own worked-example output parses into (trace, summary);
    1000 deterministic malformed generations all raise FormatError; 200
    serialize/parse round-trips are lossless."""
    template = prompts.DISTILLATION_PROMPT
    start = template.index("Example Output:") + len("Example Output:")
    end = template.index("Conversation:", start)
    worked = template[start:end].strip()
    trace, summary = parse_distilled_output(worked)
    assert trace.text == (
        "I observed Amanda stating she baked cookies and offering some to Jerry, "
        "who accepted, followed by Amanda confirming she will bring them tomorrow; "
        "this sequence shows a clear offer, acceptance, and planned delivery, "
        "leading me to conclude Amanda baked cookies and will share them with "
        "Jerry the next day."
    )
    assert summary == "Amanda baked cookies and will bring Jerry some tomorrow."

    rng = random.Random(77)

    def filler():
        return "".join(rng.choice("abcdefgh ") for _ in range(rng.randint(0, 20)))

    breakers = [
        lambda t, s: f"{t}\n{s}",                                   # no tags at all
        lambda t, s: f"<think>{t}\n{s}",                            # unclosed
        lambda t, s: f"{t}</think>\n{s}",                           # unopened
        lambda t, s: f"</think>{t}<think>\n{s}",                    # reversed
        lambda t, s: f"<think>{t}</think><think>{t}</think>\n{s}",  # duplicated
        lambda t, s: f"<think>   </think>\n{s}",                    # empty trace
        lambda t, s: f"<think>{t}</think>\n   ",                    # empty summary
        lambda t, s: f"{s} <think>{t}</think>\nmore",               # preamble text
    ]
    for i in range(1000):
        t, s = filler(), filler()
        if not s.strip():
            s = "x"
        if not t.strip():
            t = "y"
        with pytest.raises(FormatError):
            parse_distilled_output(breakers[i % len(breakers)](t, s))

    for _ in range(200):
        t = "trace " + filler() + "."
        s = "summary " + filler() + "."
        raw = serialize_distilled_output(ReasoningTrace(t), s)
        parsed_trace, parsed_summary = parse_distilled_output(raw)
        assert parsed_trace.text == t.strip()
        assert parsed_summary == s.strip()


EN_REFERENCES = [
    "Amanda baked cookies and will bring Jerry some tomorrow.",
    "Tom asked Mary for the report and she promised it by noon.",
    "The team agreed to move the launch to Friday.",
    "Lisa declined the invitation because she is traveling.",
    "Sam will pick up the keys from the front desk.",
    "Nina confirmed the budget covers two more hires.",
    "Paul apologized for the delay and rescheduled the call.",
    "The landlord will fix the heater on Monday.",
    "Dana found the missing files on the shared drive.",
    "Chris volunteered to present the quarterly numbers.",
]
ZH_REFERENCES = [
    "他们计划明天一起吃饭。",
    "客户要求尽快发货并提供发票。",
    "老师让学生下周交作业。",
    "她答应周末帮忙搬家。",
    "他因为加班取消了聚会。",
    "双方同意下个月签合同。",
    "妈妈提醒他记得买牛奶。",
    "经理批准了这次出差申请。",
    "他们决定把会议改到周五。",
    "店家同意退款并道歉。",
]


def test_acceptance_08_language_routing_and_capability_refusal(tmp_path):
    """Across a 20-example mixed corpus, every example is scored under the
    language of its reference (matching hand labels), and claim-level
    faithfulness refuses zh input when the entailment backend is en-only."""
    examples = []
    labels = {}
    for i, ref in enumerate(EN_REFERENCES):
        examples.append(make_example(f"en{i}", reference=ref))
        labels[f"en{i}"] = "en"
    for i, ref in enumerate(ZH_REFERENCES):
        examples.append(make_example(f"zh{i}", reference=ref,
                                     turns=(("甲", "请问进展如何？"), ("乙", "都安排好了。"))))
        labels[f"zh{i}"] = "zh"
    split = DatasetSplit("test", tuple(examples))
    predictions = {ex.id: ex.reference for ex in examples}

    report = Evaluator().evaluate_split(split, predictions)
    assert {row.id: row.lang for row in report.examples} == labels
    assert report.languages == {"en": 10, "zh": 10}
    # identity predictions under the right tokenizer score perfect overlap
    assert report.means["rouge1"] == 1.0

    store = FixtureStore(tmp_path)
    chat = ChatClient(fixtures=store)
    entail = EntailmentClient(fixtures=store, languages=("en",))
    with pytest.raises(LanguageSupportError):
        evaluate_faithfulness("甲: 都安排好了。", "他们计划明天一起吃饭。",
                              chat, entail, lang=LanguageTag.ZH)


def _build_cli_workspace(root):
    fixtures = root / "fixtures"
    fixtures.mkdir()
    (fixtures / "embed.json").write_text('{"mode": "orthonormal", "dim": 8}')
    (fixtures / "entail.json").write_text('{"mode": "sentence_match"}')
    (fixtures / "prefer.json").write_text('{"mode": "constant", "score": 0.5}')
    store = FixtureStore(fixtures)

    groups = []
    rng = random.Random(99)
    words = ["cookies", "meeting", "report", "tomorrow", "friday", "keys", "budget", "call"]
    for i in range(12):
        reference = " ".join(rng.choice(words) for _ in range(6))
        candidates = tuple(
            " ".join(rng.choice(words) for _ in range(rng.randint(3, 8))) for _ in range(4)
        )
        group = CandidateGroup(
            dialogue=make_dialogue(f"g{i}", ((f"Speaker{i}", f"Let us discuss {reference}."),)),
            reference=reference,
            candidates=candidates,
        )
        groups.append(group)
        verdict = {
            "scores": {f"model-{k+1}": rng.randint(1, 5) for k in range(4)},
        }
        store.put(
            "chat",
            judge_request(group.dialogue.render(), list(group.candidates)).to_payload(),
            {"content": json.dumps(verdict)},
        )
    write_groups(root / "groups.jsonl", groups)

    from rolesum.corpus import write_jsonl

    examples = [make_example(f"e{i}", reference=f"case {i} closed on friday") for i in range(8)]
    write_jsonl(root / "data.jsonl", examples)
    predictions = {ex.id: ex.reference + " maybe" for ex in examples}
    write_predictions(root / "preds.jsonl", predictions)
    for summary in predictions.values():
        store.put("chat", decomposition_request(summary).to_payload(),
                  {"content": summary.rsplit(" ", 1)[0] + "."})

    (root / "config.yaml").write_text("fixtures: fixtures\n")
    return root


def test_acceptance_09_cli_outputs_are_deterministic(tmp_path):
    """`reward` and `evaluate` write byte-identical files across repeat runs
    and across 1-vs-8 worker threads, inside a 30s budget."""
    start = time.perf_counter()
    ws = _build_cli_workspace(tmp_path)
    config = str(ws / "config.yaml")

    reward_outs = [ws / f"rewards_{tag}.jsonl" for tag in ("run1", "run2", "w8")]
    for out, workers in zip(reward_outs, ("1", "1", "8")):
        code = main(["reward", str(ws / "groups.jsonl"), "--config", config,
                     "--out", str(out), "--workers", workers])
        assert code == 0
    assert reward_outs[0].read_bytes() == reward_outs[1].read_bytes()
    assert reward_outs[0].read_bytes() == reward_outs[2].read_bytes()

    eval_outs = [ws / f"report_{tag}.json" for tag in ("run1", "run2", "w8")]
    for out, workers in zip(eval_outs, ("1", "1", "8")):
        code = main(["evaluate", str(ws / "data.jsonl"), str(ws / "preds.jsonl"),
                     "--config", config, "--out", str(out), "--workers", workers])
        assert code == 0
    assert eval_outs[0].read_bytes() == eval_outs[1].read_bytes()
    assert eval_outs[0].read_bytes() == eval_outs[2].read_bytes()

    assert time.perf_counter() - start < 30.0


def test_acceptance_10_split_manifest_integrity(tmp_path):
    """Manifests for a 9101/800/800 corpus and a 14700/818/819 corpus load
    with exactly those counts, and the rollout evaluation split is the first
    200 validation examples in file order."""

    def write_raw_split(path, prefix, count):
        with path.open("w", encoding="utf-8") as fh:
            for i in range(count):
                fh.write(json.dumps({
                    "id": f"{prefix}-{i}",
                    "turns": [{"speaker": "s", "text": f"turn {i}"}],
                    "summary": f"summary {i}",
                }))
                fh.write("\n")

    expected = {
        "corpus_a": {"train": 9101, "validation": 800, "test": 800},
        "corpus_b": {"train": 14700, "validation": 818, "test": 819},
    }
    for corpus, counts in expected.items():
        root = tmp_path / corpus
        root.mkdir()
        for split_name, count in counts.items():
            write_raw_split(root / f"{split_name}.jsonl", f"{corpus}-{split_name}", count)
        manifest = root / "manifest.json"
        manifest.write_text(json.dumps({name: f"{name}.jsonl" for name in counts}))
        splits = load_dataset(manifest)
        assert {name: len(split) for name, split in splits.items()} == counts

        rollout = make_grpo_eval_split(splits["validation"], 200)
        assert rollout.name == "grpo_eval"
        assert rollout.ids == splits["validation"].ids[:200]
        assert rollout.ids[0] == f"{corpus}-validation-0"
        assert rollout.ids[-1] == f"{corpus}-validation-199"
