#!/usr/bin/env python3
"""Build a self-contained demo workspace (corpus, candidate groups,
predictions, config, and a fixture tree) so every CLI command runs offline.

    python3 scripts/make_demo_data.py --out demo
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from rolesum.backends import FixtureStore
from rolesum.corpus import (
    AnnotatedExample,
    Dialogue,
    DialogueTurn,
    distillation_request,
    write_jsonl,
)
from rolesum.evaluation import decomposition_request, write_predictions
from rolesum.rewards import CandidateGroup, judge_request, write_groups

# (id, turns, reference summary, teacher trace, claims for the prediction)
TRAIN = [
    (
        "cookies",
        [("Amanda", "I baked cookies. Do you want some?"),
         ("Jerry", "Sure!"),
         ("Amanda", "I'll bring you tomorrow :-)")],
        "Amanda baked cookies and will bring Jerry some tomorrow.",
        "Amanda offers cookies, Jerry accepts, and Amanda commits to a delivery "
        "tomorrow, so the summary needs the baking, the offer, and the timing.",
    ),
    (
        "report",
        [("Tom", "Is the quarterly report ready?"),
         ("Mary", "Almost. You'll have it by noon."),
         ("Tom", "Great, the board meets at two.")],
        "Mary will send Tom the quarterly report by noon, before the board meets at two.",
        "Tom asks about the report, Mary promises it by noon, and Tom explains "
        "the two o'clock board deadline, so both times matter.",
    ),
    (
        "搬家",
        [("小李", "周六能帮我搬家吗？"),
         ("小王", "可以，我早上九点到。"),
         ("小李", "太好了，谢谢！")],
        "小王答应周六早上九点帮小李搬家。",
        "小李请求帮忙搬家，小王同意并给出周六早上九点的时间，"
        "所以摘要要包含人物、时间和承诺。",
    ),
]

TEST = [
    (
        "heater",
        [("Dana", "The heater is broken again."),
         ("Landlord", "I'll send someone Monday morning."),
         ("Dana", "Please make sure they call first.")],
        "The landlord will send someone to fix Dana's heater on Monday morning.",
    ),
    (
        "发货",
        [("客户", "订单什么时候发货？"),
         ("客服", "今天下午发出，明天送达。"),
         ("客户", "记得附上发票。")],
        "客服确认订单今天下午发货，明天送达，客户要求附上发票。",
    ),
]

# candidate pools for reward scoring: reference first, then weaker rewrites
GROUPS = [
    (
        "cookies",
        TRAIN[0][1],
        TRAIN[0][2],
        [
            "Amanda baked cookies and will bring Jerry some tomorrow.",
            "Amanda will bring cookies to Jerry tomorrow.",
            "Jerry baked cookies for Amanda.",
            "They talked about food.",
        ],
        {"model-1": 5, "model-2": 4, "model-3": 2, "model-4": 1},
    ),
    (
        "report",
        TRAIN[1][1],
        TRAIN[1][2],
        [
            "Mary will send Tom the quarterly report by noon, before the board meets at two.",
            "Mary promised Tom the report by noon.",
            "Tom will write the report after the board meeting.",
            "The report is late.",
        ],
        {"model-1": 5, "model-2": 4, "model-3": 2, "model-4": 2},
    ),
]

# predictions to evaluate against TEST, with their decomposed claims; the
# sentence_match fixture supports a claim only when it appears verbatim in
# the dialogue, so the second heater claim goes unsupported on purpose
PREDICTIONS = {
    "heater": (
        "The landlord will send someone on Monday to fix the heater.",
        ["I'll send someone Monday morning.",
         "The repair crew already came."],
    ),
    "发货": (
        "订单今天下午发货，明天送达。",
        ["今天下午发出", "明天送达"],
    ),
}

CONFIG = """\
fixtures: fixtures

backends:
  entail:
    languages: [en, zh]

eval:
  support_threshold: 0.5
  on_unsupported: skip
"""


def _example(row) -> AnnotatedExample:
    ex_id, turns, reference = row[0], row[1], row[2]
    dialogue = Dialogue(ex_id, tuple(DialogueTurn(s, t) for s, t in turns))
    return AnnotatedExample(dialogue, reference)


def build(root: Path) -> None:
    root.mkdir(parents=True, exist_ok=True)
    fixtures = root / "fixtures"
    fixtures.mkdir(exist_ok=True)
    (fixtures / "embed.json").write_text('{"mode": "orthonormal", "dim": 16}\n')
    (fixtures / "entail.json").write_text('{"mode": "sentence_match"}\n')
    (fixtures / "prefer.json").write_text('{"mode": "constant", "score": 0.62}\n')
    store = FixtureStore(fixtures)

    train = [_example(row) for row in TRAIN]
    test = [_example(row) for row in TEST]
    write_jsonl(root / "train.jsonl", train)
    write_jsonl(root / "test.jsonl", test)
    (root / "manifest.json").write_text(json.dumps(
        {"train": "train.jsonl", "test": "test.jsonl"}, indent=2) + "\n")

    # teacher replies for `rolesum distill`
    for example, row in zip(train, TRAIN):
        trace = row[3]
        reply = f"<think>{trace}</think>\n{example.reference}"
        store.put("chat", distillation_request(example).to_payload(), {"content": reply})

    # judge verdicts for `rolesum reward`
    groups = []
    for gid, turns, reference, candidates, scores in GROUPS:
        dialogue = Dialogue(gid, tuple(DialogueTurn(s, t) for s, t in turns))
        group = CandidateGroup(dialogue=dialogue, reference=reference,
                               candidates=tuple(candidates))
        groups.append(group)
        ranking = sorted(scores, key=scores.get, reverse=True)
        verdict = json.dumps({"scores": scores, "best-to-worst": ranking})
        store.put("chat", judge_request(dialogue.render(), candidates).to_payload(),
                  {"content": verdict})
    write_groups(root / "groups.jsonl", groups)

    # claim decompositions for `rolesum evaluate`
    write_predictions(root / "predictions.jsonl",
                      {k: v[0] for k, v in PREDICTIONS.items()})
    for summary, claims in PREDICTIONS.values():
        store.put("chat", decomposition_request(summary).to_payload(),
                  {"content": "\n".join(claims)})

    (root / "config.yaml").write_text(CONFIG)
    print(f"demo workspace ready in {root}/")
    print("  train.jsonl groups.jsonl test.jsonl predictions.jsonl config.yaml fixtures/")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo", help="workspace directory (default: demo)")
    args = parser.parse_args()
    build(Path(args.out))


if __name__ == "__main__":
    main()
