"""Command-line front end: run scenario files or bundled presets.

Exit codes: 0 success, 1 nothing evaluated, 2 malformed scenario, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .scenarios import (
    MalformedSpecError,
    RunSummary,
    default_jobs,
    list_presets,
    parse_scenario,
    run_preset,
    run_scenario,
)


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", required=True, help="output file path")
    parser.add_argument("--format", choices=("csv", "jsonl"), default=None)
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument(
        "--jobs", type=int, default=None,
        help="parallel sweep points (default: $BRANLAB_JOBS or 1)",
    )
    parser.add_argument(
        "--no-timestamp", action="store_true",
        help="omit the generation-time header line for byte-reproducible output",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branlab",
        description="Latency and attack-risk sweeps for blockchain-mediated access networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a JSON scenario file")
    run_p.add_argument("--scenario", required=True, help="scenario JSON path")
    _add_run_options(run_p)

    preset_p = sub.add_parser("preset", help="run a bundled preset sweep")
    preset_p.add_argument("name", help="preset name, see list-presets")
    _add_run_options(preset_p)

    sub.add_parser("list-presets", help="list bundled presets")
    return parser


def _report(summary: RunSummary) -> int:
    print(
        f"wrote {summary.points_total} rows to {summary.out_path} "
        f"({summary.points_ok} evaluated, {summary.points_skipped} skipped)"
    )
    return 0 if summary.points_ok >= 1 else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list-presets":
        for name, description in list_presets():
            print(f"{name}\t{description}")
        return 0

    jobs = args.jobs if args.jobs is not None else default_jobs()
    try:
        if args.command == "run":
            spec = parse_scenario(args.scenario)
            summary = run_scenario(
                spec,
                out_path=args.out,
                fmt=args.format,
                seed=args.seed,
                jobs=jobs,
                include_timestamp=not args.no_timestamp,
            )
        else:
            summary = run_preset(
                args.name,
                out_path=args.out,
                fmt=args.format or "csv",
                seed=args.seed,
                jobs=jobs,
                include_timestamp=not args.no_timestamp,
            )
    except MalformedSpecError as exc:
        print(f"malformed scenario: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    return _report(summary)


if __name__ == "__main__":
    sys.exit(main())
