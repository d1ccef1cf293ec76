"""Bounded explicit-state checking: invariants, deadlocks, refinement.

Exploration is breadth-first and level-synchronous from the initial state.
States are deduplicated by structural equality (every variable is an
immutable canonical value, so equal states have equal dumps and vice
versa).  Events are tried in declaration order and bindings in canonical
element order, so reports are reproducible; the first failure found is one
of minimal depth.

Expansion of a level may be farmed out to worker threads; results are
merged in level order, so the report does not depend on the worker count.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

from .machine import MachineDefinition, MachineError, State, Trace, check_invariants, enabled


class Verdict(str, enum.Enum):
    OK = "ok"
    INVARIANT_VIOLATION = "invariant-violation"
    DEADLOCK = "deadlock"
    BOUND_EXHAUSTED = "bound-exhausted"
    REFINEMENT_VIOLATION = "refinement-violation"


EXIT_STATUS = {
    Verdict.OK: 0,
    Verdict.INVARIANT_VIOLATION: 1,
    Verdict.DEADLOCK: 3,
    Verdict.BOUND_EXHAUSTED: 4,
    Verdict.REFINEMENT_VIOLATION: 5,
}


class UnmatchedEvent(MachineError):
    def __init__(self, event: str, abstract: str):
        super().__init__(f"concrete event {event!r} refines unknown abstract event {abstract!r}")
        self.event = event
        self.abstract = abstract


@dataclass(frozen=True)
class CheckConfig:
    max_depth: int = 8
    max_states: int = 1_000_000
    detect_deadlock: bool = False
    # a halted state the machine marks as terminal is not a deadlock
    allow_terminal: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.max_depth < 0 or self.max_states < 1 or self.workers < 1:
            raise ValueError("bounds must be non-negative and workers >= 1")


@dataclass
class CheckReport:
    verdict: Verdict
    states_explored: int
    depth: int
    labels: list[str] = field(default_factory=list)
    trace: Optional[Trace] = None
    state: Optional[State] = None
    detail: str = ""
    # True when the whole reachable state space was explored
    complete: bool = False

    @property
    def exit_status(self) -> int:
        return EXIT_STATUS[self.verdict]

    @property
    def ok(self) -> bool:
        return self.verdict is Verdict.OK

    def headline(self) -> str:
        parts = [self.verdict.value] + self.labels
        return " ".join(parts)

    def render(self, dump: Callable[[State], str] | None = None) -> str:
        lines = [
            f"# verdict: {self.headline()}",
            f"# states explored: {self.states_explored}",
            f"# depth: {self.depth}{' (complete)' if self.complete else ''}",
        ]
        if self.detail:
            lines.append(f"# detail: {self.detail}")
        out = "\n".join(lines) + "\n"
        if self.trace is not None:
            out += self.trace.format()
        if self.state is not None and dump is not None:
            out += "# final state:\n"
            out += "".join(f"#   {line}\n" for line in dump(self.state).splitlines())
        return out


TransitionCheck = Callable[[State, object, dict, State], Optional[str]]


def _trace_to(parent: dict, state: State) -> Trace:
    steps = []
    while parent[state] is not None:
        prev, name, b = parent[state]
        steps.append((name, b))
        state = prev
    return Trace(steps[::-1])


def explore(
    machine: MachineDefinition,
    config: CheckConfig,
    transition_check: TransitionCheck | None = None,
) -> CheckReport:
    """The shared breadth-first engine behind every check."""
    init = machine.initial()
    parent: dict = {init: None}
    bad = check_invariants(machine, init)
    if bad:
        return CheckReport(Verdict.INVARIANT_VIOLATION, 1, 0, bad, Trace(), init)

    def expand(state):
        out = []
        for event, b in enabled(machine, state):
            succ = event.action(state, b)
            problem = transition_check(state, event, b, succ) if transition_check else None
            out.append((event.name, b, succ, problem))
        return out

    def halted(state, successors) -> bool:
        if successors or not config.detect_deadlock:
            return False
        return not (config.allow_terminal and machine.terminal and machine.terminal(state))

    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        level = [init]
        depth = 0
        while level:
            last = depth == config.max_depth
            if last and not config.detect_deadlock:
                return CheckReport(Verdict.OK, len(parent), depth)
            expansions = list(pool.map(expand, level)) if pool else [expand(s) for s in level]
            for state, succs in zip(level, expansions):
                if halted(state, succs):
                    return CheckReport(
                        Verdict.DEADLOCK, len(parent), depth, [], _trace_to(parent, state), state,
                        detail="no event is enabled",
                    )
            if last:
                return CheckReport(Verdict.OK, len(parent), depth)
            next_level = []
            for state, succs in zip(level, expansions):
                for name, b, succ, problem in succs:
                    if problem:
                        trace = _trace_to(parent, state)
                        trace.append(name, b)
                        return CheckReport(
                            Verdict.REFINEMENT_VIOLATION, len(parent), depth + 1,
                            ["refinement"], trace, succ, detail=problem,
                        )
                    if succ in parent:
                        continue
                    if len(parent) >= config.max_states:
                        return CheckReport(
                            Verdict.BOUND_EXHAUSTED, len(parent), depth,
                            detail=f"more than {config.max_states} states",
                        )
                    parent[succ] = (state, name, b)
                    bad = check_invariants(machine, succ)
                    if bad:
                        return CheckReport(
                            Verdict.INVARIANT_VIOLATION, len(parent), depth + 1,
                            bad, _trace_to(parent, succ), succ,
                        )
                    next_level.append(succ)
            level = next_level
            depth += 1
        return CheckReport(Verdict.OK, len(parent), depth - 1, complete=True)
    finally:
        if pool:
            pool.shutdown()


def bfs_check(machine: MachineDefinition, config: CheckConfig | None = None) -> CheckReport:
    return explore(machine, config or CheckConfig())


def deadlock_probe(machine: MachineDefinition, config: CheckConfig | None = None) -> CheckReport:
    config = config or CheckConfig()
    if not config.detect_deadlock:
        config = CheckConfig(**{**_asdict(config), "detect_deadlock": True})
    return explore(machine, config)


def _asdict(cfg: CheckConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


def refinement_hook(abstract: MachineDefinition, concrete: MachineDefinition) -> TransitionCheck:
    """Per-transition check that a concrete step simulates its abstract event."""
    if concrete.abstraction is None:
        raise ValueError(f"{concrete.name} declares no abstraction function")
    for ev in concrete.events:
        if not abstract.has_event(ev.abstract_name):
            raise UnmatchedEvent(ev.name, ev.abstract_name)
    project = concrete.abstraction

    def check(pre, event, b, post) -> Optional[str]:
        aev = abstract.event(event.abstract_name)
        ab = {p: b[p] for p in aev.param_names}
        apre = project(pre)
        if not aev.guard(apre, ab):
            return f"{event.name} fires where abstract {aev.name} is disabled"
        expected = aev.action(apre, ab)
        got = project(post)
        if got != expected:
            differ = [f.name for f in fields(got) if getattr(got, f.name) != getattr(expected, f.name)]
            return f"{event.name} projects differently from abstract {aev.name} on {', '.join(differ)}"
        return None

    return check


def refine_check(
    abstract: MachineDefinition,
    concrete: MachineDefinition,
    config: CheckConfig | None = None,
) -> CheckReport:
    """Explore the concrete machine, checking its invariants (gluing included)
    and that every transition simulates the corresponding abstract event."""
    return explore(concrete, config or CheckConfig(), refinement_hook(abstract, concrete))
