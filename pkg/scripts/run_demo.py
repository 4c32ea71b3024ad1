#!/usr/bin/env python3
"""Run the full offline pipeline against the generated demo workspace:
distill reasoning traces, score candidate groups, evaluate predictions,
and print the report.

    python3 scripts/run_demo.py --out demo
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
from make_demo_data import build  # noqa: E402

from rolesum.cli import main as rolesum  # noqa: E402


def run(argv: list[str]) -> None:
    print(f"\n$ rolesum {' '.join(argv)}")
    code = rolesum(argv)
    if code != 0:
        raise SystemExit(f"command failed with exit code {code}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo", help="workspace directory (default: demo)")
    args = parser.parse_args()
    ws = Path(args.out)
    build(ws)

    config = ["--config", str(ws / "config.yaml")]
    run(["distill", str(ws / "train.jsonl"), *config])
    run(["reward", str(ws / "groups.jsonl"), *config])
    run(["evaluate", str(ws / "test.jsonl"), str(ws / "predictions.jsonl"), *config])
    run(["report", str(ws / "predictions.report.json")])

    print(f"\noutputs: {ws}/train.distilled.jsonl {ws}/groups.rewards.jsonl "
          f"{ws}/predictions.report.json")


if __name__ == "__main__":
    main()
