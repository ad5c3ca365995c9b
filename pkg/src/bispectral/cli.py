"""Command line front end."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from .report import MODES, ProblemError, emit_report, parse_problem, run_pipeline

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bispectral",
        description="Darboux transformations of generalized Airy operators.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run the {mode} pipeline")
        p.add_argument("inputs", nargs="*", help="problem files (default or '-': standard input)")
        p.add_argument("--degree-bound", type=int, default=None)
        p.add_argument("--series-truncation", type=int, default=None)
        p.add_argument("--format", choices=("text", "structured"), default="text")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for several inputs")
    return parser


def _run_one(args: tuple[str, str, int | None, int | None, str]) -> tuple[int, str]:
    text, mode, d, m, fmt = args
    spec = parse_problem(text, d, m)
    report = run_pipeline(spec, mode)
    if fmt == "structured":
        return report.exit_code, json.dumps(report.to_dict(), indent=2, sort_keys=True)
    return report.exit_code, emit_report(report, fmt)


def main(argv: list[str] | None = None) -> int:
    ns = _build_parser().parse_args(argv)
    sources = ns.inputs or ["-"]
    texts = []
    try:
        for src in sources:
            if src == "-":
                texts.append(sys.stdin.read())
            else:
                with open(src, encoding="utf-8") as fh:
                    texts.append(fh.read())
        # validate everything before running anything
        for text in texts:
            parse_problem(text, ns.degree_bound, ns.series_truncation)
    except (OSError, ProblemError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    jobs = [(t, ns.mode, ns.degree_bound, ns.series_truncation, ns.format) for t in texts]
    if ns.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            outcomes = list(pool.map(_run_one, jobs))  # map keeps input order
    else:
        outcomes = [_run_one(j) for j in jobs]
    if ns.format == "structured":
        if len(outcomes) == 1:
            sys.stdout.write(outcomes[0][1] + "\n")
        else:
            sys.stdout.write("[\n" + ",\n".join(o for _, o in outcomes) + "\n]\n")
    else:
        sys.stdout.write("\n".join(o for _, o in outcomes))
    return max(code for code, _ in outcomes)


if __name__ == "__main__":
    sys.exit(main())
