"""Command-line front end for the chat models.

Exit statuses::

    0  ok / expectations met
    1  invariant violation
    2  usage error (argparse)
    3  deadlock
    4  state bound exhausted
    5  refinement violation
    6  a scenario step whose guard does not hold
    7  expectation mismatch
    8  unreadable or malformed input
    9  no such screen cell (read)

Model settings given on the command line override a scenario header.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .checker import EXIT_STATUS, CheckConfig, Verdict, bfs_check, deadlock_probe, refine_check
from .machine import GuardNotSatisfied, InvariantViolation, check_invariants, enabled, format_step, step, walk
from .mutants import MUTANTS
from .relkernel import is_atom
from .scenario import MACHINES, Scenario, ScenarioError, header_lines, parse_scenario
from .whatsapp_abstract import build_machine0, default_contents, default_users
from .whatsapp_concrete import MissingCell, load_concrete_state, read_chat

SEED_ENV = "EVENTKIT_SEED"

EXIT_OK = 0
EXIT_VIOLATION = EXIT_STATUS[Verdict.INVARIANT_VIOLATION]
EXIT_DEADLOCK = EXIT_STATUS[Verdict.DEADLOCK]
EXIT_GUARD = 6
EXIT_EXPECTATION = 7
EXIT_INPUT = 8
EXIT_MISSING_CELL = 9


class InputError(Exception):
    pass


# -- shared options ---------------------------------------------------------


def _pool(kind: str):
    make = default_users if kind == "users" else default_contents

    def parse(text: str) -> tuple[str, ...]:
        if text.isdigit():
            return make(int(text))
        items = tuple(x for x in text.split(",") if x)
        bad = [x for x in items if not is_atom(x)]
        if bad:
            raise argparse.ArgumentTypeError(f"not atoms: {', '.join(bad)}")
        return items

    return parse


def _add_model_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--machine", choices=sorted(MACHINES))
    g.add_argument("--users", type=_pool("users"), help="pool size or comma-separated names")
    g.add_argument("--contents", type=_pool("contents"), help="pool size or comma-separated names")
    g.add_argument("--subset-cap", type=int, dest="max_subset", help="largest recipient set tried")
    g.add_argument("--add-content", choices=("pointwise", "literal"))
    g.add_argument("--remove-content", choices=("recompute", "verbatim"))
    g.add_argument("--forward", choices=("merge", "literal"))
    g.add_argument("--broadcast", choices=("bidirectional", "literal"))
    g.add_argument("--symmetric-chat", action=argparse.BooleanOptionalAction, default=None)


def _add_check_options(p: argparse.ArgumentParser, depth: int) -> None:
    p.add_argument("--scenario", type=Path, help="take model settings from a scenario header")
    p.add_argument("--depth", type=int, default=depth)
    p.add_argument("--max-states", type=int, default=CheckConfig.max_states)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--mutant", choices=sorted(MUTANTS))


def _overrides(args) -> dict:
    names = ("users", "contents", "max_subset", "add_content", "remove_content", "forward",
             "broadcast", "symmetric_chat")
    return {n: getattr(args, n) for n in names}


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None


def _scenario(args) -> Scenario:
    path = getattr(args, "scenario", None)
    if path is None:
        return Scenario()
    try:
        return parse_scenario(_read(path))
    except ScenarioError as exc:
        raise InputError(f"{path}:{exc.line}:{exc.column}: {exc.reason}") from None


def _config(args, sc: Scenario):
    try:
        return sc.config(**_overrides(args))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _state_block(machine, state) -> str:
    return "# final state:\n" + "".join(f"#   {line}\n" for line in machine.dump(state).splitlines())


# -- run --------------------------------------------------------------------


def cmd_run(args, out) -> int:
    sc = _scenario(args)
    cfg = _config(args, sc)
    kind = args.machine or sc.machine
    machine = sc.build(cfg, kind)
    try:
        trace, lines = sc.trace(machine)
    except ScenarioError as exc:
        raise InputError(f"{args.scenario}:{exc.line}:{exc.column}: {exc.reason}") from None

    out.write(f"# {machine.name}: {len(trace)} step(s)\n")
    state = machine.initial()
    history = [check_invariants(machine, state)]
    for i, ((name, b), lineno) in enumerate(zip(trace.steps, lines), 1):
        try:
            state = step(machine, state, name, b)
        except GuardNotSatisfied:
            out.write(_state_block(machine, state))
            raise _Failure(
                EXIT_GUARD, f"{args.scenario}:{lineno}: step {i}: guard of {format_step(name, b)} does not hold"
            ) from None
        bad = check_invariants(machine, state)
        history.append(bad)
        out.write(f"{i}: {format_step(name, b)}\n")
        if bad:
            out.write(f"#   violated: {' '.join(bad)}\n")
    halted = not enabled(machine, state)
    if halted:
        out.write("# deadlock\n")
    out.write(_state_block(machine, state))

    if not sc.expectations:
        return EXIT_VIOLATION if any(history) else EXIT_OK
    status = EXIT_OK
    for exp in sc.expectations:
        met = _met(exp, history, halted)
        out.write(f"# {exp}: {'met' if met else 'NOT met'}\n")
        if not met:
            status = EXIT_EXPECTATION
    return status


def _met(exp, history, halted) -> bool:
    if exp.verdict == "ok":
        return not any(history)
    if exp.verdict == "deadlock":
        return halted
    return any(bad and set(exp.labels) <= set(bad) for bad in history)


class _Failure(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


# -- simulate ---------------------------------------------------------------


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV}={raw!r} is not an integer") from None


def cmd_simulate(args, out) -> int:
    sc = _scenario(args)
    cfg = _config(args, sc)
    kind = args.machine or sc.machine
    machine = sc.build(cfg, kind)
    seed = args.seed if args.seed is not None else _default_seed()
    if args.steps < 0:
        raise InputError("--steps must be >= 0")

    out.write("".join(line + "\n" for line in header_lines(kind, cfg)))
    out.write(f"# seed {seed}, {args.steps} step(s) requested\n")
    try:
        trace, state = walk(machine, args.steps, seed)
    except InvariantViolation as exc:
        out.write(exc.trace.format())
        out.write(f"# violated: {' '.join(exc.labels)}\n")
        out.write(_state_block(machine, exc.state))
        return EXIT_VIOLATION
    out.write(trace.format())
    out.write(_state_block(machine, state))
    if trace.deadlocked and args.deadlock_error:
        return EXIT_DEADLOCK
    return EXIT_OK


# -- check / refine ---------------------------------------------------------


def _check_config(args, deadlock: bool) -> CheckConfig:
    try:
        return CheckConfig(
            max_depth=args.depth,
            max_states=args.max_states,
            detect_deadlock=deadlock,
            allow_terminal=getattr(args, "allow_terminal", False),
            workers=args.workers,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_check(args, out) -> int:
    sc = _scenario(args)
    cfg = _config(args, sc)
    if args.mutant:
        kind, build = MUTANTS[args.mutant]
        if args.machine and args.machine != kind:
            raise InputError(f"mutant {args.mutant} is a variant of {kind}")
        machine = build(cfg)
    else:
        machine = sc.build(cfg, args.machine)
    if args.events:
        try:
            machine = machine.restrict(e.strip() for e in args.events.split(",") if e.strip())
        except Exception as exc:
            raise InputError(str(exc)) from None
    config = _check_config(args, args.deadlock)
    report = deadlock_probe(machine, config) if args.deadlock else bfs_check(machine, config)
    out.write(f"# machine: {machine.name}{' (' + args.mutant + ')' if args.mutant else ''}\n")
    out.write(report.render(machine.dump))
    return report.exit_status


def cmd_refine(args, out) -> int:
    sc = _scenario(args)
    cfg = _config(args, sc)
    abstract = build_machine0(cfg)
    if args.mutant:
        kind, build = MUTANTS[args.mutant]
        if kind != "m2":
            raise InputError(f"mutant {args.mutant} is not a machine2 variant")
        concrete = build(cfg)
    else:
        concrete = MACHINES["m2"](cfg)
    report = refine_check(abstract, concrete, _check_config(args, False))
    out.write(f"# refinement: {abstract.name} <- {concrete.name}"
              f"{' (' + args.mutant + ')' if args.mutant else ''}\n")
    out.write(report.render(concrete.dump))
    return report.exit_status


# -- read -------------------------------------------------------------------


def cmd_read(args, out) -> int:
    text = _read(args.state_dump)
    try:
        state = load_concrete_state(text)
    except ValueError as exc:
        raise InputError(f"{args.state_dump}: {exc}") from None
    try:
        items = read_chat(state, args.u1, args.u2)
    except MissingCell as exc:
        raise _Failure(EXIT_MISSING_CELL, str(exc)) from None
    for c in items:
        out.write(f"{c}\n")
    return EXIT_OK


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eventkit", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="replay a scenario file")
    p.add_argument("scenario", type=Path)
    _add_model_options(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="seeded random walk; prints a replayable scenario")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--scenario", type=Path, help="take model settings from a scenario header")
    p.add_argument("--deadlock-error", action="store_true", help="exit 3 if the walk deadlocks")
    _add_model_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="bounded breadth-first invariant/deadlock check")
    _add_check_options(p, CheckConfig.max_depth)
    p.add_argument("--deadlock", action="store_true", help="report states with no enabled event")
    p.add_argument("--allow-terminal", action="store_true",
                   help="halting with both pools used up is not a deadlock")
    p.add_argument("--events", help="comma-separated events to keep")
    _add_model_options(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("refine", help="check machine2 against machine0")
    _add_check_options(p, 5)
    _add_model_options(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("read", help="list a screen cell of a dumped machine2 state")
    p.add_argument("--state-dump", type=Path, required=True)
    p.add_argument("--u1", required=True)
    p.add_argument("--u2", required=True)
    p.set_defaults(func=cmd_read)
    return parser


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except InputError as exc:
        print(f"eventkit: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _Failure as exc:
        print(f"eventkit: {exc}", file=sys.stderr)
        return exc.status


if __name__ == "__main__":
    sys.exit(main())
