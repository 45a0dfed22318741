"""Command-line interface.

    disarm check --rules a.dpl b.dpl          static checks, exit 0 iff clean
    disarm query --rules ... --facts f.dpl 'WL(trustee->?x)'
    disarm simulate --config run.cfg --seed 3 --out results/

``simulate`` writes ug.csv, storage.csv, messages.csv plus rendered figures
(ug.png, storage.png) into the output directory and prints a mean-UG summary.
Exit codes: 0 success, 1 validation or parse failure, 2 runtime failure.

The config file is flat ``key = value`` text mirroring the simulation fields
(rounds, seed, n_providers, consumers_per_policy, ttl_limit, theory, ...);
flags override file values.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from disarm import corpus
from disarm.dposl import ParseError, parse_program, parse_literal, serialize_literal
from disarm.engine import TheoryError, check_theory, query as engine_query, run as engine_run
from disarm.engine import match_literal, substitute
from disarm.testbed import (
    POLICIES,
    SimConfig,
    policy_means,
    run_simulation,
    write_reports,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2

_INT_KEYS = {"rounds", "seed", "n_providers", "consumers_per_policy",
             "ttl_limit", "interactions_per_round", "witness_request_period",
             "witness_sufficiency", "event_window"}
_FLOAT_KEYS = {"rating_confidence", "rating_transaction_value", "courtesy_score"}


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].split("%", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _load_programs(paths: list[str]):
    programs = []
    for path in paths:
        text = Path(path).read_text()
        programs.append((path, parse_program(text)))
    merged = programs[0][1]
    if len(programs) > 1:
        merged = merged.merge(*[p for _, p in programs[1:]])
    return merged


def cmd_check(args) -> int:
    status = EXIT_OK
    programs = []
    for path in args.rules:
        try:
            programs.append(parse_program(Path(path).read_text()))
        except ParseError as exc:
            print(f"{path}:{exc.line}:{exc.col}: {exc.message}", file=sys.stderr)
            status = EXIT_INVALID
        except OSError as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            status = EXIT_INVALID
    if status != EXIT_OK:
        return status
    try:
        merged = programs[0] if programs else None
        if merged is not None and len(programs) > 1:
            merged = merged.merge(*programs[1:])
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if merged is not None:
        problems = check_theory(merged)
        for problem in problems:
            print(f"error: {problem}", file=sys.stderr)
        if problems:
            return EXIT_INVALID
    total_rules = sum(len(p.rules) for p in programs)
    print(f"ok: {len(args.rules)} file(s), {total_rules} rule(s)")
    return EXIT_OK


def cmd_query(args) -> int:
    try:
        theory = _load_programs(args.rules)
        facts = []
        if args.facts:
            facts = list(parse_program(Path(args.facts).read_text()).facts)
        pattern = parse_literal(args.pattern)
    except (ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        results = engine_query(theory, facts, pattern, now=args.now)
    except TheoryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # engine runtime failures
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for subst, tag in results:
        ground = substitute(pattern, subst)
        print(f"{serialize_literal(ground)}\t{tag}")
    return EXIT_OK


def _build_sim_config(args) -> SimConfig:
    values: dict[str, object] = {}
    if args.config:
        raw = _load_config_file(args.config)
        for key, text in raw.items():
            if key in _INT_KEYS:
                values[key] = int(text)
            elif key in _FLOAT_KEYS:
                values[key] = float(text)
            elif key == "theory":
                values[key] = text
            elif key == "policies":
                values["policies"] = tuple(text.split())
            else:
                raise ValueError(f"unknown config key {key!r}")
    theory = values.pop("theory", None)
    if args.seed is not None:
        values["seed"] = args.seed
    if args.ttl is not None:
        values["ttl_limit"] = args.ttl
    if args.rounds is not None:
        values["rounds"] = args.rounds
    if args.theory is not None:
        theory = args.theory
    if theory is not None:
        # a single-theory run: that policy plus the two baselines
        values["policies"] = (f"disarm_{theory}", "direct", "none")
    return SimConfig(**values)


def cmd_simulate(args) -> int:
    try:
        cfg = _build_sim_config(args)
        cfg.validate()
    except (ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        logs = run_simulation(cfg)
        out = Path(args.out)
        write_reports(logs, out, cfg.policies)
        if not args.no_plots:
            from disarm import plots

            plots.render_report_figures(logs, out, cfg.policies)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    means = policy_means(logs, cfg.policies)
    print(f"{'policy':<12} {'mean_ug':>8}")
    for policy in sorted(means, key=means.get, reverse=True):
        print(f"{policy:<12} {means[policy]:>8.3f}")
    print(f"reports written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disarm",
        description="defeasible-rule agent reputation: check rule files, "
                    "query theories, run the simulation testbed")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="parse and statically check rule files")
    p_check.add_argument("--rules", nargs="+", required=True, metavar="PATH")
    p_check.set_defaults(func=cmd_check)

    p_query = sub.add_parser("query", help="evaluate a theory and match a pattern")
    p_query.add_argument("--rules", nargs="+", required=True, metavar="PATH")
    p_query.add_argument("--facts", metavar="PATH")
    p_query.add_argument("--now", type=int, default=None,
                         help="injected clock for now()")
    p_query.add_argument("pattern", help="literal pattern, e.g. 'WL(trustee->?x)'")
    p_query.set_defaults(func=cmd_query)

    p_sim = sub.add_parser("simulate", help="run the testbed and write reports")
    p_sim.add_argument("--config", metavar="PATH")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--rounds", type=int, default=None)
    p_sim.add_argument("--ttl", type=int, default=None)
    p_sim.add_argument("--theory", choices=("t1", "t2", "t3"), default=None)
    p_sim.add_argument("--out", default="out", metavar="DIR")
    p_sim.add_argument("--no-plots", action="store_true",
                       help="skip figure rendering")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
