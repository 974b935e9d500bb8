"""Command-line entry point: ``pollsim <subcommand> [--config PATH] ...``."""

from __future__ import annotations

import argparse
import logging
import sys

from pollsim import runner
from pollsim.human_data import RecodeError
from pollsim.llm_backend import BackendError
from pollsim.questionnaire import QuestionnaireError

COMMANDS = {
    "plan": lambda cfg, args: runner.cmd_plan(cfg),
    "run": lambda cfg, args: runner.cmd_run(cfg, dry_run=args.dry_run),
    "parse": lambda cfg, args: runner.cmd_parse(cfg),
    "compare": lambda cfg, args: runner.cmd_compare(cfg),
    "report": lambda cfg, args: runner.cmd_report(cfg),
    "all": lambda cfg, args: runner.cmd_all(cfg, dry_run=args.dry_run),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pollsim",
        description="Simulate issue polling with an LLM and compare against human survey data.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="run config JSON (default: packaged demo config)")
        p.add_argument("--backend", choices=["live", "mock"])
        p.add_argument("--n", type=int, help="replicates per (question, cell)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output root; the run lives in OUT/<run_id>")
        p.add_argument("--dry-run", action="store_true", help="render prompts and price them, send nothing")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = runner.load_config(
            args.config, backend=args.backend, n=args.n, seed=args.seed, out=args.out
        )
        COMMANDS[args.command](config, args)
    except (runner.RunError, QuestionnaireError, RecodeError, BackendError, ValueError, OSError) as exc:
        print(f"pollsim {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("interrupted; re-run the same command to resume", file=sys.stderr)
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
