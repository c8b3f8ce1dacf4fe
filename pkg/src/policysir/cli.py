"""Command-line entry point: ``policysir {simulate,optimize,game,compare}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import PolicySirError, PreconditionError, ScenarioError, SearchSpaceTooLarge
from .scenario import compare_runs, load_report, load_scenario, run

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_GUARD = 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="policysir", description="Policy-controlled SIR simulation and search.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for mode in ("simulate", "optimize", "game"):
        sp = sub.add_parser(mode, help=f"run a {mode} scenario")
        sp.add_argument("scenario", help="scenario YAML file or the name of a bundled scenario")
        sp.add_argument("--out", help="output path prefix (default: scenario 'output' or results/<name>)")
        sp.add_argument("--threads", type=int, default=1, help="worker processes for the optimizer")
        sp.add_argument("--allow-large-search", action="store_true",
                        help="lift the 5,000,000-schedule guard on optimize")
        sp.add_argument("--no-figures", action="store_true", help="skip the PNG figure")
    cp = sub.add_parser("compare", help="diff two report JSON files")
    cp.add_argument("report_a")
    cp.add_argument("report_b")
    cp.add_argument("--out", help="write the diff JSON here instead of stdout")
    sub.add_parser("list", help="list bundled scenarios")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list":
            from .scenario import bundled_scenarios

            print("\n".join(bundled_scenarios()))
            return EXIT_OK
        if args.command == "compare":
            diff = compare_runs(load_report(args.report_a), load_report(args.report_b))
            text = json.dumps(diff, indent=2, sort_keys=True)
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text + "\n")
            else:
                print(text)
            return EXIT_OK
        sc = load_scenario(args.scenario)
        if sc.mode != args.command:
            raise ScenarioError(f"scenario mode is '{sc.mode}' but the '{args.command}' command was used",
                                field="mode")
        if args.threads < 1:
            raise PreconditionError("--threads must be at least 1")
        rep = run(sc, args.out, workers=args.threads, allow_large_search=args.allow_large_search,
                  figures=not args.no_figures)
    except SearchSpaceTooLarge as exc:
        print(f"error: {exc} (pass --allow-large-search to run anyway)", file=sys.stderr)
        return EXIT_GUARD
    except (PolicySirError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for key, path in sorted(rep.files.items()):
        print(f"{key}: {path}")
    if not rep.feasible:
        print("error: no schedule satisfies the herd-immunity constraint", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
