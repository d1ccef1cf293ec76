"""Guarded-event machines: events, enabledness, atomic steps, invariants.

An event is ``any x where G(s, x) then s := A(s, x) end``.  Parameters are
enumerated from finite, state-dependent domains; the guard filters the
candidates and the action maps a pre-state to a post-state without touching
the pre-state.  States are immutable values, so a "step" is just a function
call.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Optional, Sequence

from .relkernel import Element, ParseError, fmt, parse_element

State = Any
Binding = dict  # param name -> Element
Domain = Callable[[State, Binding], Iterable[Element]]

INITIALISATION = "initialisation"


class MachineError(Exception):
    pass


class UnknownEvent(MachineError):
    def __init__(self, name: str):
        super().__init__(f"unknown event {name!r}")
        self.event = name


class GuardNotSatisfied(MachineError):
    def __init__(self, event: str, binding: Binding, step: int | None = None):
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"guard of {format_step(event, binding)} does not hold{where}")
        self.event = event
        self.binding = binding
        self.step = step


class BadBinding(MachineError):
    pass


class InvariantViolation(MachineError):
    def __init__(self, labels: list[str], trace: "Trace", state: State):
        super().__init__(f"invariant(s) violated: {', '.join(labels)} after {len(trace)} step(s)")
        self.labels = labels
        self.trace = trace
        self.state = state


@dataclass(frozen=True)
class EventDescriptor:
    name: str
    params: tuple[tuple[str, Domain], ...]
    guard: Callable[[State, Binding], bool]
    action: Callable[[State, Binding], State]
    # name of the abstract event this one refines (defaults to its own name)
    refines: Optional[str] = None
    # optional shortcut yielding exactly the guard-passing bindings, in the
    # same order as filtering ``bindings()``; tests hold it to that
    fast: Optional[Callable[[State], Iterable[Binding]]] = None

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p for p, _ in self.params)

    @property
    def abstract_name(self) -> str:
        return self.refines or self.name


@dataclass(frozen=True)
class MachineDefinition:
    name: str
    initial: Callable[[], State]
    events: tuple[EventDescriptor, ...]
    invariants: tuple[tuple[str, Callable[[State], bool]], ...]
    # projection onto the abstract state space, for refinement machines
    abstraction: Optional[Callable[[State], State]] = None
    # states in which halting counts as normal termination (see checker)
    terminal: Optional[Callable[[State], bool]] = None
    dump: Callable[[State], str] = field(default=lambda s: repr(s))

    def __post_init__(self):
        names = [e.name for e in self.events]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate event names in {self.name}")
        labels = [label for label, _ in self.invariants]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate invariant labels in {self.name}")

    def event(self, name: str) -> EventDescriptor:
        for e in self.events:
            if e.name == name:
                return e
        raise UnknownEvent(name)

    def has_event(self, name: str) -> bool:
        return any(e.name == name for e in self.events)

    def restrict(self, names: Iterable[str]) -> "MachineDefinition":
        """Same machine with only the named events (declaration order kept)."""
        keep = set(names)
        for n in keep:
            self.event(n)
        return replace(self, events=tuple(e for e in self.events if e.name in keep))

    def with_event(self, event: EventDescriptor) -> "MachineDefinition":
        """Replace the event of the same name."""
        self.event(event.name)
        return replace(
            self,
            events=tuple(event if e.name == event.name else e for e in self.events),
        )


# -- bindings -----------------------------------------------------------


def bindings(event: EventDescriptor, state: State) -> Iterable[Binding]:
    """Candidate bindings from the parameter domains, in canonical order."""

    def go(i: int, partial: Binding):
        if i == len(event.params):
            yield dict(partial)
            return
        pname, domain = event.params[i]
        for value in domain(state, partial):
            partial[pname] = value
            yield from go(i + 1, partial)
        partial.pop(pname, None)

    return go(0, {})


def extend_bindings(params, state: State, partial: Binding) -> Iterable[Binding]:
    """Extend ``partial`` over the remaining parameter domains."""
    if not params:
        yield dict(partial)
        return
    (pname, domain), rest = params[0], params[1:]
    for value in domain(state, partial):
        yield from extend_bindings(rest, state, {**partial, pname: value})


def filtered_bindings(event: EventDescriptor, state: State) -> list[Binding]:
    """Reference enumeration: every candidate binding the guard accepts."""
    return [b for b in bindings(event, state) if event.guard(state, b)]


def guard_holds(event: EventDescriptor, state: State, binding: Binding) -> bool:
    return bool(event.guard(state, binding))


def enabled(machine: MachineDefinition, state: State) -> list[tuple[EventDescriptor, Binding]]:
    """Every (event, binding) whose guard holds, events in declaration order."""
    out = []
    for event in machine.events:
        if event.fast is not None:
            out.extend((event, b) for b in event.fast(state))
            continue
        params = event.params
        guard = event.guard
        last = len(params) - 1
        partial: Binding = {}

        def go(i: int) -> None:
            pname, domain = params[i]
            for value in domain(state, partial):
                partial[pname] = value
                if i == last:
                    if guard(state, partial):
                        out.append((event, dict(partial)))
                else:
                    go(i + 1)
            partial.pop(pname, None)

        if params:
            go(0)
        elif guard(state, partial):
            out.append((event, {}))
    return out


def _check_binding(event: EventDescriptor, binding: Binding) -> None:
    if set(binding) != set(event.param_names):
        raise BadBinding(
            f"{event.name} takes ({', '.join(event.param_names)}), got ({', '.join(binding)})"
        )


def step(machine: MachineDefinition, state: State, event_name: str, binding: Binding | None = None) -> State:
    """Fire ``event_name`` under ``binding``; the caller's state is untouched."""
    binding = {} if binding is None else binding
    if event_name == INITIALISATION:
        if binding:
            raise BadBinding("initialisation takes no parameters")
        return machine.initial()
    event = machine.event(event_name)
    _check_binding(event, binding)
    if not event.guard(state, binding):
        raise GuardNotSatisfied(event_name, binding)
    return event.action(state, binding)


class _Disabled:
    def __repr__(self) -> str:
        return "DISABLED"


DISABLED = _Disabled()


def try_step(machine: MachineDefinition, state: State, event_name: str, binding: Binding | None = None):
    """Like :func:`step`, but a false guard gives :data:`DISABLED` instead of raising."""
    try:
        return step(machine, state, event_name, binding)
    except GuardNotSatisfied:
        return DISABLED


def check_invariants(machine: MachineDefinition, state: State) -> list[str]:
    violated = []
    for label, pred in machine.invariants:
        try:
            ok = pred(state)
        except Exception:
            # a predicate that cannot even be evaluated is violated
            ok = False
        if not ok:
            violated.append(label)
    return violated


# -- traces -------------------------------------------------------------


@dataclass
class Trace:
    steps: list[tuple[str, Binding]] = field(default_factory=list)
    deadlocked: bool = False

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return self.steps == other.steps and self.deadlocked == other.deadlocked

    def append(self, event: str, binding: Binding) -> None:
        self.steps.append((event, dict(binding)))

    def prefix(self, n: int) -> "Trace":
        return Trace(list(self.steps[:n]))

    def format(self) -> str:
        lines = [format_step(e, b) for e, b in self.steps]
        if self.deadlocked:
            lines.append("# deadlock")
        return "".join(line + "\n" for line in lines)


def format_step(event: str, binding: Binding) -> str:
    parts = [event] + [f"{k}={fmt(v)}" for k, v in binding.items()]
    return " ".join(parts)


def split_step(line: str) -> list[tuple[str, int]]:
    """Split a step line into whitespace-separated tokens, keeping braces intact.

    Returns ``(token, column)`` pairs, columns 1-based.
    """
    tokens = []
    depth = 0
    start = None
    for i, ch in enumerate(line):
        if ch.isspace() and depth == 0:
            if start is not None:
                tokens.append((line[start:i], start + 1))
                start = None
            continue
        if start is None:
            start = i
        if ch in "{(":
            depth += 1
        elif ch in "})":
            depth -= 1
    if start is not None:
        tokens.append((line[start:], start + 1))
    return tokens


class StepSyntaxError(ValueError):
    def __init__(self, message: str, column: int):
        super().__init__(f"column {column}: {message}")
        self.column = column
        self.reason = message


def parse_step(line: str, machine: MachineDefinition | None = None) -> tuple[str, Binding]:
    """Parse ``event p=v ...``.

    Positional values (``create_chat_session A B``) are accepted when a
    machine is given, and are bound in declaration order.  Hyphenated event
    names are normalised to underscores.
    """
    tokens = split_step(line)
    if not tokens:
        raise StepSyntaxError("empty step", 1)
    name, _ = tokens[0]
    name = name.replace("-", "_")
    declared: Sequence[str] = ()
    if machine is not None and name != INITIALISATION:
        try:
            declared = machine.event(name).param_names
        except UnknownEvent:
            raise StepSyntaxError(f"unknown event {name!r}", 1) from None
    binding: Binding = {}
    positional = 0
    for tok, col in tokens[1:]:
        key, eq, raw = tok.partition("=")
        if eq and "{" not in key and "(" not in key:
            value_col = col + len(key) + 1
        else:
            if machine is None or positional >= len(declared):
                raise StepSyntaxError(f"unexpected argument {tok!r}", col)
            key, raw, value_col = declared[positional], tok, col
            positional += 1
        if key in binding:
            raise StepSyntaxError(f"parameter {key!r} given twice", col)
        if declared and key not in declared:
            raise StepSyntaxError(f"{name} has no parameter {key!r}", col)
        try:
            binding[key] = parse_element(raw)
        except ParseError as exc:
            raise StepSyntaxError(exc.reason, value_col + exc.column - 1) from None
    if declared:
        missing = [p for p in declared if p not in binding]
        if missing:
            raise StepSyntaxError(f"missing parameter(s) {', '.join(missing)}", len(line) + 1)
        binding = {p: binding[p] for p in declared}
    return name, binding


def parse_trace(text: str, machine: MachineDefinition | None = None) -> Trace:
    trace = Trace()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line == "# deadlock":
                trace.deadlocked = True
            continue
        try:
            trace.append(*parse_step(line, machine))
        except StepSyntaxError as exc:
            raise StepSyntaxError(f"line {lineno}: {exc.reason}", exc.column) from None
    return trace


def replay(machine: MachineDefinition, trace: Trace, state: State | None = None) -> State:
    """Run ``trace`` from ``state`` (initial by default) and return the final state."""
    s = machine.initial() if state is None else state
    for i, (name, b) in enumerate(trace.steps, 1):
        try:
            s = step(machine, s, name, b)
        except GuardNotSatisfied as exc:
            raise GuardNotSatisfied(exc.event, exc.binding, i) from None
    return s


# -- random simulation --------------------------------------------------


def walk(machine: MachineDefinition, steps: int, seed: int) -> tuple[Trace, State]:
    """Seeded uniform walk over enabled (event, binding) pairs.

    Invariants are checked after every step; a violation raises
    :class:`InvariantViolation` carrying the trace so far.  The walk ends
    early, with ``trace.deadlocked`` set, when nothing is enabled.
    Returns the trace and the final state.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    rng = random.Random(seed)
    state = machine.initial()
    trace = Trace()
    bad = check_invariants(machine, state)
    if bad:
        raise InvariantViolation(bad, trace, state)
    for _ in range(steps):
        choices = enabled(machine, state)
        if not choices:
            trace.deadlocked = True
            break
        event, b = choices[rng.randrange(len(choices))]
        state = event.action(state, b)
        trace.append(event.name, b)
        bad = check_invariants(machine, state)
        if bad:
            raise InvariantViolation(bad, trace, state)
    return trace, state


def random_walk(machine: MachineDefinition, steps: int, seed: int) -> Trace:
    return walk(machine, steps, seed)[0]
