"""Command-line entry points.

    rolesum distill  DATA.jsonl          augment a dataset with reasoning traces
    rolesum reward   GROUPS.jsonl        score candidate groups -> reward rows
    rolesum evaluate DATA.jsonl PREDS    score predictions -> report JSON
    rolesum report   REPORT.json         print a report as a table

Exit codes: 0 success, 1 fatal error, 2 completed but degraded (trace-less
distillation rows, or faithfulness skipped for unsupported languages).

Output files are byte-stable: rerunning a command with the same inputs (and
any worker count) writes identical bytes.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .backends import BackendError
from .config import ConfigError, build_clients, build_engine, build_evaluator, load_config
from .corpus import CorpusError, FormatError, distill_dataset, load_split, write_jsonl
from .evaluation import LanguageSupportError, load_predictions, match_predictions, write_report
from .rewards import ComponentError, group_result_rows, load_groups

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_DEGRADED = 2


def _derived_out(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def _load_cli_config(args: argparse.Namespace):
    return load_config(args.config, workers=args.workers, fixtures=args.fixtures)


def cmd_distill(args: argparse.Namespace) -> int:
    config = _load_cli_config(args)
    data_path = Path(args.data)
    split = load_split(data_path, args.split)
    out = Path(args.out) if args.out else _derived_out(data_path, ".distilled.jsonl")
    if args.dry_run:
        print(f"would distill {len(split)} examples from {data_path} -> {out}")
        return EXIT_OK
    teacher = build_clients(config)["chat"]
    if teacher is None:
        raise ConfigError("distill needs a chat backend (endpoint or fixtures)")
    distilled = distill_dataset(
        split, teacher, retries=config.distill_retries, max_workers=config.workers
    )
    write_jsonl(out, distilled.examples)
    missing = sum(1 for ex in distilled.examples if ex.trace is None)
    print(f"wrote {len(distilled)} examples to {out} ({missing} without a trace)",
          file=sys.stderr)
    return EXIT_DEGRADED if missing else EXIT_OK


def cmd_reward(args: argparse.Namespace) -> int:
    config = _load_cli_config(args)
    groups_path = Path(args.groups)
    groups = load_groups(groups_path)
    out = Path(args.out) if args.out else _derived_out(groups_path, ".rewards.jsonl")
    if args.dry_run:
        sizes = sorted({len(g.candidates) for g in groups})
        print(f"would score {len(groups)} groups (sizes {sizes}) from {groups_path} -> {out}")
        return EXIT_OK
    engine = build_engine(config)
    results = engine.score_groups(groups, max_workers=config.workers)
    with out.open("w", encoding="utf-8") as fh:
        for result in results:
            for row in group_result_rows(result):
                fh.write(json.dumps(row, ensure_ascii=False))
                fh.write("\n")
    n_rows = sum(len(r.scores) for r in results)
    print(f"wrote {n_rows} reward rows for {len(results)} groups to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load_cli_config(args)
    data_path = Path(args.data)
    split = load_split(data_path, args.split)
    predictions = load_predictions(args.predictions)
    out = Path(args.out) if args.out else _derived_out(Path(args.predictions), ".report.json")
    if args.dry_run:
        match_predictions(split, predictions)
        print(f"would evaluate {len(predictions)} predictions against {data_path} -> {out}")
        return EXIT_OK
    evaluator = build_evaluator(config)
    report = evaluator.evaluate_split(split, predictions, max_workers=config.workers)
    write_report(out, report)
    status = f"wrote report for {len(report.examples)} examples to {out}"
    if report.degraded:
        status += f" (faithfulness skipped for {len(report.skipped_faithfulness)})"
    print(status, file=sys.stderr)
    return EXIT_DEGRADED if report.degraded else EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    raw = json.loads(Path(args.report).read_text(encoding="utf-8"))
    print(f"split: {raw.get('split')}   examples: {len(raw.get('examples', []))}   "
          f"threshold: {raw.get('threshold')}")
    languages = raw.get("languages", {})
    if languages:
        print("languages: " + "  ".join(f"{k}={v}" for k, v in sorted(languages.items())))
    means = raw.get("means", {})
    counts = raw.get("counts", {})
    if means:
        width = max(len(name) for name in means)
        print(f"{'metric'.ljust(width)}  {'mean':>10}  {'n':>5}")
        for name in sorted(means):
            print(f"{name.ljust(width)}  {means[name]:>10.4f}  {counts.get(name, 0):>5}")
    skipped = raw.get("skipped_faithfulness", [])
    if skipped:
        print(f"faithfulness skipped for {len(skipped)} example(s)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--workers", type=int, help="worker threads for backend calls")
    common.add_argument("--fixtures", help="fixture directory (replay responses, no network)")
    common.add_argument("--dry-run", action="store_true", help="validate inputs and plan, no calls")
    common.add_argument("--verbose", "-v", action="store_true", help="log at INFO level")

    parser = argparse.ArgumentParser(
        prog="rolesum",
        description="Reward scoring and evaluation for multi-role dialogue summarization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distill", parents=[common],
                       help="add teacher reasoning traces to a dataset")
    p.add_argument("data", help="dataset JSONL")
    p.add_argument("--out", help="output JSONL (default: sibling .distilled.jsonl)")
    p.add_argument("--split", default="train", help="split name for validation (default: train)")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("reward", parents=[common],
                       help="score candidate groups into rewards and advantages")
    p.add_argument("groups", help="candidate groups JSONL")
    p.add_argument("--out", help="output JSONL (default: sibling .rewards.jsonl)")
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("evaluate", parents=[common],
                       help="evaluate predicted summaries against references")
    p.add_argument("data", help="dataset JSONL with reference summaries")
    p.add_argument("predictions", help="predictions JSONL ({id, summary} rows)")
    p.add_argument("--out", help="report JSON path (default: sibling .report.json)")
    p.add_argument("--split", default="test", help="split name for validation (default: test)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="print a report JSON as a table")
    p.add_argument("report", help="report JSON file")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, CorpusError, FormatError, ComponentError, BackendError,
            LanguageSupportError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
