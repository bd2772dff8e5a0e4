"""Command-line entry point: ``edgeflow run | laws | fuzz``.

Exit codes: 0 when everything passes, 1 when a property is violated,
2 for usage or configuration errors. Output files go to the directory
named by ``EDGEFLOW_OUT_DIR`` (default ``./edgeflow-out``) unless
``--out`` or ``--trace`` say otherwise.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from edgeflow import confluence, laws
from edgeflow.scenarios import load_config, run_scenario
from edgeflow.sim import ConfigError

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
OUT_ENV = "EDGEFLOW_OUT_DIR"


def _out_dir(explicit: str | None) -> Path:
    return Path(explicit or os.environ.get(OUT_ENV) or "edgeflow-out")


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        result = run_scenario(cfg, args.seed)
    except ConfigError as exc:
        print(f"edgeflow: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "structured":
        body, suffix = result.report_json(), "report.json"
    else:
        body, suffix = result.report_text(), "report.txt"
    report_path = out / f"{result.name}.{suffix}"
    trace_path = Path(args.trace) if args.trace else out / f"{result.name}.trace.jsonl"
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(body)
    trace_path.write_text(result.trace)
    sys.stdout.write(body)
    print(f"report: {report_path}\ntrace: {trace_path}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_VIOLATION


def cmd_laws(args) -> int:
    if args.iterations < 1:
        print("edgeflow: --iterations must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    started = time.perf_counter()
    results = laws.run_all(args.iterations, args.seed)
    for res in results:
        status = "PASS" if res.ok else "FAIL"
        print(f"{status} {res.name}: {res.checked} cases")
        for failure in res.failures:
            print(f"    {failure}")
    print(f"{len(results)} suites in {time.perf_counter() - started:.1f}s")
    return EXIT_OK if all(r.ok for r in results) else EXIT_VIOLATION


def cmd_fuzz(args) -> int:
    if args.max_ops < 1 or args.replicas < 1:
        print("edgeflow: --max-ops and --replicas must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    kinds = args.kinds.split(",")
    bad = [k for k in kinds if k not in confluence.OPS]
    if bad:
        print(f"edgeflow: no confluence model for {', '.join(bad)}", file=sys.stderr)
        return EXIT_USAGE
    ok = True
    total = 0
    for kind in kinds:
        started = time.perf_counter()
        res = confluence.check(kind, args.replicas, args.max_ops)
        expected = confluence.expected_count(args.replicas * len(confluence.OPS[kind]), args.max_ops)
        total += res.interleavings
        passed = res.ok and res.interleavings == expected
        ok = ok and passed
        print(f"{'PASS' if passed else 'FAIL'} {kind}: {res.executions} executions, "
              f"{res.interleavings} interleavings checked (space size {expected}), "
              f"{len(res.violations)} violations, {time.perf_counter() - started:.1f}s")
        for violation in res.violations[:5]:
            print(f"    {violation}")
    print(f"interleavings checked: {total}")
    return EXIT_OK if ok else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgeflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario from a TOML config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--format", choices=("text", "structured"), default="text")
    run.add_argument("--trace", default=None, help="trace output path (JSON lines)")
    run.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./edgeflow-out)")
    run.set_defaults(func=cmd_run)

    law = sub.add_parser("laws", help="run the randomised law suites")
    law.add_argument("--iterations", type=int, default=1000)
    law.add_argument("--seed", type=int, default=0)
    law.set_defaults(func=cmd_laws)

    fuzz = sub.add_parser("fuzz", help="exhaustive confluence check over small scripts")
    fuzz.add_argument("--max-ops", type=int, default=4)
    fuzz.add_argument("--replicas", type=int, default=3)
    fuzz.add_argument("--seed", type=int, default=0, help="accepted for symmetry; the search is exhaustive")
    fuzz.add_argument("--kinds", default="orset,pncounter")
    fuzz.set_defaults(func=cmd_fuzz)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
