"""Command-line interface.

Usage:
    python -m cbd_toolkit validate cbd_toolkit/fixtures/prbox.json
    python -m cbd_toolkit analyze cbd_toolkit/fixtures/prbox.json --output json
    python -m cbd_toolkit estimate trials.csv --design design.json -o system.json
    python -m cbd_toolkit sample system.json --per-context 10000 --seed 7 -o trials.csv
    python -m cbd_toolkit fixtures -o fixtures/

Reports go to stdout, logs to stderr. Exit codes: 0 success, 1 I/O, parse or
internal error, 2 invalid input, 3 ``--assert-noncontextual`` failed.
"""

import argparse
import json
import logging
import shutil
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .errors import CbdError
from .ingest import estimate_system, load_design, load_trials_csv, simulate_trials, write_trials_csv
from .logger import setup_logger
from .report import SKIPPABLE, ContextualityAnalyzer, counts_table, log_failure, render_json, render_text, verdict
from .system import System, dump_system, load_system, save_system

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_ASSERTION = 3

FIXTURES_DIR = Path(__file__).parent / "fixtures"


def _load(path: Path) -> Tuple[Optional[System], int]:
    try:
        return load_system(path), EXIT_OK
    except FileNotFoundError:
        print(f"File not found: {path}", file=sys.stderr)
        return None, EXIT_ERROR
    except json.JSONDecodeError as e:
        print(f"{path}: not valid JSON: {str(e)}", file=sys.stderr)
        return None, EXIT_ERROR
    except OSError as e:
        print(f"{path}: {str(e)}", file=sys.stderr)
        return None, EXIT_ERROR
    except CbdError as e:
        print(f"{path}: invalid system: {str(e)}", file=sys.stderr)
        return None, EXIT_INVALID


def cmd_validate(args: argparse.Namespace) -> int:
    system, code = _load(args.path)
    if system is None:
        return code
    print(
        f"{args.path}: valid system {system.name!r} with {len(system.contents)} contents, "
        f"{len(system.contexts)} contexts and {len(system.identity_classes)} identity classes"
    )
    for ctx in system.contexts:
        print(f"  {ctx.id}: {', '.join(ctx.contents)}")
    return EXIT_OK


def _analyze_one(path: Path, analyzer: ContextualityAnalyzer) -> Tuple[Optional[dict], int]:
    system, code = _load(path)
    if system is None:
        return None, code
    try:
        return analyzer.analyze(system), EXIT_OK
    except CbdError as e:
        print(f"{path}: {str(e)}", file=sys.stderr)
        return None, EXIT_INVALID
    except Exception as e:
        log_failure(path, e)
        print(f"{path}: internal error: {str(e)}", file=sys.stderr)
        return None, EXIT_ERROR


def cmd_analyze(args: argparse.Namespace) -> int:
    analyzer = ContextualityAnalyzer(skip=args.skip or (), timings=args.timings)
    paths: List[Path] = args.paths
    if len(paths) == 1:
        results = [_analyze_one(paths[0], analyzer)]
    else:
        # map() keeps input order, so the combined output stays deterministic
        with ThreadPoolExecutor(max_workers=args.workers) as executor:
            results = list(executor.map(lambda p: _analyze_one(p, analyzer), paths))

    reports = [report for report, _ in results if report is not None]
    if args.output == "json":
        indent = None if args.indent <= 0 else args.indent
        payload = reports[0] if len(paths) == 1 else reports
        if reports:
            print(render_json(payload, indent=indent))
    else:
        print("\n\n".join(render_text(r) for r in reports))

    logger.info(f"Analysis stats: {analyzer.get_stats()}")
    for _, code in results:
        if code != EXIT_OK:
            return code
    if args.assert_noncontextual and not all(verdict(r) for r in reports):
        print("Assertion failed: at least one system is contextual", file=sys.stderr)
        return EXIT_ASSERTION
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    try:
        design = load_design(args.design)
        trials = load_trials_csv(args.trials)
        estimate = estimate_system(trials, design)
    except (FileNotFoundError, json.JSONDecodeError) as e:
        print(f"Cannot read input: {str(e)}", file=sys.stderr)
        return EXIT_ERROR
    except CbdError as e:
        print(f"{args.trials}: {type(e).__name__}: {str(e)}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"Cannot read input: {str(e)}", file=sys.stderr)
        return EXIT_ERROR
    try:
        save_system(estimate.system, args.output_file)
    except OSError as e:
        print(f"Cannot write {args.output_file}: {str(e)}", file=sys.stderr)
        return EXIT_ERROR
    print(counts_table(estimate.counts))
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    system, code = _load(args.path)
    if system is None:
        return code
    if args.per_context < 1:
        print("--per-context must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    trials = simulate_trials(system, args.per_context, args.seed)
    try:
        write_trials_csv(trials, args.output_file)
    except OSError as e:
        print(f"Cannot write {args.output_file}: {str(e)}", file=sys.stderr)
        return EXIT_ERROR
    if args.design:
        with open(args.design, "w", encoding="utf-8") as f:
            json.dump(dump_system(system, include_pmf=False), f, indent=2)
            f.write("\n")
    print(f"Wrote {len(trials)} trials ({args.per_context} per context) to {args.output_file}")
    return EXIT_OK


def cmd_fixtures(args: argparse.Namespace) -> int:
    names = sorted(p.name for p in FIXTURES_DIR.iterdir() if p.suffix in (".json", ".csv"))
    if args.output_dir is None:
        for name in names:
            print(name)
        return EXIT_OK
    try:
        args.output_dir.mkdir(parents=True, exist_ok=True)
        for name in names:
            shutil.copyfile(FIXTURES_DIR / name, args.output_dir / name)
    except OSError as e:
        print(f"Cannot write fixtures to {args.output_dir}: {str(e)}", file=sys.stderr)
        return EXIT_ERROR
    print(f"Wrote {len(names)} fixtures to {args.output_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbd_toolkit",
        description="Decide, measure and witness contextuality in systems of random variables.",
    )
    parser.add_argument("--log-level", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
                        help="Logging level for stderr (default WARNING).")
    parser.add_argument("--log-dir", default=None,
                        help="Also write a timestamped log file into this directory.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="Check a System JSON document.")
    p.add_argument("path", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="Run the full analysis and print a report.")
    p.add_argument("paths", type=Path, nargs="+")
    p.add_argument("--output", choices=("json", "text"), default="text",
                   help="Report format (default text).")
    p.add_argument("--skip", action="append", choices=SKIPPABLE,
                   help="Skip an expensive section; may be repeated.")
    p.add_argument("--assert-noncontextual", action="store_true",
                   help="Exit 3 when any system has no identity coupling.")
    p.add_argument("--timings", action="store_true",
                   help="Include per-section wall-clock timings (reports stop being byte-stable).")
    p.add_argument("--indent", type=int, default=2,
                   help="JSON indent level (use 0 for compact output).")
    p.add_argument("--workers", type=int, default=4,
                   help="Threads used when several files are given.")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("estimate", help="Estimate a System from a trials CSV.")
    p.add_argument("trials", type=Path)
    p.add_argument("--design", type=Path, required=True, help="System JSON without pmfs.")
    p.add_argument("-o", "--output-file", type=Path, required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sample", help="Simulate i.i.d. trials from a System.")
    p.add_argument("path", type=Path)
    p.add_argument("--per-context", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output-file", type=Path, required=True)
    p.add_argument("--design", type=Path, default=None,
                   help="Also write the matching design file here.")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fixtures", help="List the bundled fixtures or copy them into a directory.")
    p.add_argument("-o", "--output-dir", type=Path, default=None)
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logger(args.log_dir, args.log_level)
    try:
        return args.func(args)
    except Exception as e:
        logger.error(f"Unhandled error in {args.command}: {str(e)}")
        logger.debug(traceback.format_exc())
        print(f"Internal error: {str(e)}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
