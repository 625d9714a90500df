"""Command-line entry point: ``geophase run | run-builtin | list-builtins | show-builtin | verify``.

Exit status is 0 on success, 1 for invalid input and 2 for numerical
failures (including failed acceptance checks).
"""

from __future__ import annotations

import argparse
import sys

import yaml

from .errors import NumericalError, ValidationError
from .scenario import BUILTINS, METHODS, builtin_document, emit_report, load_scenario, parse_scenario, run_scenario

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _methods(text: str) -> list[str]:
    out = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in out if m not in METHODS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"unknown method(s) {', '.join(bad) or '(none)'}; choose from {', '.join(METHODS)}")
    return out


def _param(text: str) -> tuple[str, object]:
    key, sep, val = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key, yaml.safe_load(val)


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--steps", type=int, help="override the number of time steps")
    p.add_argument("--methods", type=_methods, help="comma-separated subset of " + ",".join(METHODS))
    p.add_argument("--final-only", action="store_true", help="report only the final sample")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="geophase", description="Geometric phases of mixed-state trajectories.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a scenario file (YAML or JSON)")
    run.add_argument("file")
    _add_run_options(run)

    rb = sub.add_parser("run-builtin", help="run a builtin scenario")
    rb.add_argument("name", choices=sorted(BUILTINS))
    rb.add_argument("--set", dest="params", type=_param, action="append", default=[],
                    metavar="KEY=VALUE", help="builtin parameter, e.g. --set theta=0.5")
    _add_run_options(rb)

    sb = sub.add_parser("show-builtin", help="print a builtin scenario document as YAML")
    sb.add_argument("name", choices=sorted(BUILTINS))
    sb.add_argument("--set", dest="params", type=_param, action="append", default=[], metavar="KEY=VALUE")

    sub.add_parser("list-builtins", help="list builtin scenarios")
    sub.add_parser("verify", help="run the acceptance checks")
    return parser


def _run(scenario, args) -> None:
    if args.steps is not None:
        scenario = scenario.with_steps(args.steps)
    if args.methods:
        scenario = scenario.with_methods(args.methods)
    report = run_scenario(scenario, final_only=args.final_only)
    text = emit_report(report, args.format, args.output)
    if args.output in (None, "-"):
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-builtins":
            for name, fn in BUILTINS.items():
                print(f"{name}: {fn().get('description', '')}")
        elif args.command == "show-builtin":
            sys.stdout.write(yaml.safe_dump(builtin_document(args.name, **dict(args.params)), sort_keys=False))
        elif args.command == "run":
            _run(load_scenario(args.file), args)
        elif args.command == "run-builtin":
            _run(parse_scenario(builtin_document(args.name, **dict(args.params))), args)
        elif args.command == "verify":
            from .acceptance import run_all

            results = run_all(echo=True)
            return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
