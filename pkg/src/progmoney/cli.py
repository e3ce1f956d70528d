"""Command-line harness.

    progmoney run <scenario.scn> --seed N --out DIR   # observation log,
                                                      # ledger export, report
    progmoney audit <ledger.txt>                      # exit 0 iff clean
    progmoney check <policy.pol> [...]                # parse + check
    progmoney report <run dir>                        # recompute from artifacts

Exit codes: 0 ok, 1 scenario/policy parse error, 2 audit or reconciliation
violation, 3 runtime error.  PROGMONEY_SEED is the fallback seed when
--seed is not given.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .policy import CheckFailure, ParseError, collect_check_errors, parse as parse_policy
from .registry import audit_export
from .report import build_report, render_report, report_for
from .scenario import ScenarioError, load_scenario, run_scenario

OBSERVATIONS_FILE = "observations.log"
LEDGER_FILE = "ledger.txt"
REPORT_FILE = "report.txt"


def _fallback_seed() -> int:
    raw = os.environ.get("PROGMONEY_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        return 0


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_scenario(args.scenario)
    except FileNotFoundError:
        print(f"error: no such scenario: {args.scenario}", file=sys.stderr)
        return 1
    except ScenarioError as exc:
        print(f"error: {args.scenario}: {exc}", file=sys.stderr)
        return 1
    seed = args.seed if args.seed is not None else _fallback_seed()
    sim = run_scenario(cfg, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    obs_text = "\n".join(sim.observations) + "\n"
    ledger_text = sim.registry.export() + "\n"
    (out / OBSERVATIONS_FILE).write_text(obs_text, encoding="utf-8")
    (out / LEDGER_FILE).write_text(ledger_text, encoding="utf-8")
    (out / REPORT_FILE).write_text(render_report(report_for(sim)), encoding="utf-8")
    violations = sim.registry.audit()
    if violations:
        for violation in violations:
            print(f"audit: {violation}", file=sys.stderr)
        return 2
    print(f"run complete: {out / REPORT_FILE}")
    return 0


def _cmd_audit(args: argparse.Namespace) -> int:
    try:
        text = Path(args.ledger).read_text(encoding="utf-8")
    except FileNotFoundError:
        print(f"error: no such ledger: {args.ledger}", file=sys.stderr)
        return 1
    violations = audit_export(text)
    if violations:
        for violation in violations:
            print(f"audit: {violation}", file=sys.stderr)
        return 2
    print("audit ok")
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    status = 0
    for path in args.policies:
        try:
            source = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            print(f"error: no such policy file: {path}", file=sys.stderr)
            return 1
        try:
            program = parse_policy(source)
        except ParseError as exc:
            print(f"{path}: parse error: {exc}", file=sys.stderr)
            status = 1
            continue
        errors = collect_check_errors(program)
        if errors:
            for error in errors:
                print(f"{path}: {error}", file=sys.stderr)
            status = 1
        else:
            print(f"{path}: ok ({len(program.rules)} rules)")
    return status


def _cmd_report(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    try:
        obs_lines = (run_dir / OBSERVATIONS_FILE).read_text(encoding="utf-8").splitlines()
        ledger_lines = (run_dir / LEDGER_FILE).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as exc:
        print(f"error: missing artifact: {exc.filename}", file=sys.stderr)
        return 1
    try:
        rendered = render_report(build_report(obs_lines, ledger_lines))
    except ValueError as exc:
        print(f"report: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(rendered)
    stored = run_dir / REPORT_FILE
    if stored.exists() and stored.read_text(encoding="utf-8") != rendered:
        print("report: recomputed report differs from stored report", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="progmoney", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="run a scenario file")
    run_parser.add_argument("scenario")
    run_parser.add_argument("--seed", type=int, default=None)
    run_parser.add_argument("--out", default="out")
    run_parser.set_defaults(func=_cmd_run)

    audit_parser = sub.add_parser("audit", help="audit a ledger export")
    audit_parser.add_argument("ledger")
    audit_parser.set_defaults(func=_cmd_audit)

    check_parser = sub.add_parser("check", help="parse and check policy files")
    check_parser.add_argument("policies", nargs="+")
    check_parser.set_defaults(func=_cmd_check)

    report_parser = sub.add_parser("report", help="recompute a report from artifacts")
    report_parser.add_argument("run_dir")
    report_parser.set_defaults(func=_cmd_report)
    return parser


def run_cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        return args.func(args)
    except (ScenarioError, ParseError, CheckFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # the CLI boundary reports and exits
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
