"""Command-line entry point: ``run``, ``list-scenarios`` and ``verify``.

Exit codes: 0 all thresholds pass, 1 threshold failure, 2 configuration
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .errors import ArgumentError, ConfigError, DomainError, NumericalError, PrecisionError

EXIT_OK, EXIT_THRESHOLD, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
OUT_ENV = "ENTROPIC_DYNAMICS_OUT"


def _engine_list(text: str) -> list[str]:
    return [e for part in text.split(",") for e in [part.strip()] if e]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entropic-dynamics",
                                     description="Run and compare ensemble, field and wave engines.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario configuration")
    run.add_argument("config", help="path to a JSON scenario, or a bundled scenario name")
    run.add_argument("--engines", nargs="+", metavar="ENGINE",
                     help="subset of ensemble, fields, wave (space or comma separated)")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help=f"output directory (default: config, then ${OUT_ENV}, then ./out)")
    run.add_argument("--threads", type=int, help="worker threads for the ensemble engine")

    sub.add_parser("list-scenarios", help="list bundled scenarios")

    verify = sub.add_parser("verify", help="run the acceptance suite")
    verify.add_argument("--only", help="comma-separated criterion numbers")
    verify.add_argument("--threads", type=int, default=1)
    return parser


def _cmd_run(args) -> int:
    from .scenario import load_config, run_scenario, write_outputs

    engines = None
    if args.engines is not None:
        engines = [e for item in args.engines for e in _engine_list(item)]
    cfg = load_config(args.config, engines=engines, seed=args.seed, threads=args.threads)
    out_dir = args.out or cfg.output_dir or os.environ.get(OUT_ENV) or "out"
    result = run_scenario(cfg)
    csv_path, json_path = write_outputs(result, out_dir)
    for check in result.report["thresholds"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status} {check['name']}: {check['value']!r} (limit {check['limit']!r})")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK if result.passed else EXIT_THRESHOLD


def _cmd_list() -> int:
    from .scenario import bundled_scenarios

    for name, description in bundled_scenarios().items():
        print(f"{name:<18} {description}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .acceptance import CRITERIA, format_result, run_acceptance

    only = None
    if args.only:
        try:
            only = [int(x) for x in args.only.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"--only: {exc}") from exc
        unknown = sorted(set(only) - set(CRITERIA))
        if unknown:
            raise ConfigError(f"--only: unknown criteria {unknown}")
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    results = run_acceptance(only, threads=args.threads)
    for r in results:
        print(format_result(r), flush=True)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_THRESHOLD


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "list-scenarios":
            return _cmd_list()
        return _cmd_verify(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure in engine {exc.engine} at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ArgumentError, DomainError, PrecisionError) as exc:
        # parameters that pass schema validation but not an engine's preconditions
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
