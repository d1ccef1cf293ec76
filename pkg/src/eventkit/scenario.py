"""Line-oriented scenario files.

A scenario is a header, a trace and optional expectations::

    # comment
    machine m2
    users A B C
    contents c1 c2
    max-subset 2
    variant add-content=literal symmetric-chat=on
    add_user A
    add_user u=B
    expect invariant-violation inv4

Header directives must come before the first step; ``expect`` lines may
appear anywhere.  Steps use the trace format, with positional or ``p=v``
arguments.  Every error carries a line and column.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .machine import MachineDefinition, StepSyntaxError, Trace, parse_step
from .relkernel import is_atom
from .whatsapp_abstract import ModelConfig, build_machine0
from .whatsapp_concrete import build_machine2

MACHINES = {"m0": build_machine0, "m2": build_machine2}
VERDICTS = ("ok", "invariant-violation", "deadlock")

# scenario/CLI spelling -> ModelConfig field
VARIANTS = {
    "add-content": "add_content",
    "remove-content": "remove_content",
    "forward": "forward",
    "broadcast": "broadcast",
    "symmetric-chat": "symmetric_chat",
}
_BOOLS = {"on": True, "yes": True, "true": True, "off": False, "no": False, "false": False}
_HEADER = ("machine", "users", "contents", "max-subset", "variant")


class ScenarioError(ValueError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.reason = message


@dataclass(frozen=True)
class Expectation:
    verdict: str
    labels: tuple[str, ...] = ()
    line: int = 0

    def __str__(self) -> str:
        return " ".join(("expect", self.verdict) + self.labels)


@dataclass
class Scenario:
    machine: str = "m0"
    # ModelConfig fields set by the header
    settings: dict = field(default_factory=dict)
    # (line number, column of the step, text)
    steps: list[tuple[int, int, str]] = field(default_factory=list)
    expectations: list[Expectation] = field(default_factory=list)

    def config(self, **overrides) -> ModelConfig:
        """Model configuration; ``overrides`` (from the command line) win."""
        cfg = ModelConfig(**self.settings)
        extra = {k: v for k, v in overrides.items() if v is not None}
        return replace(cfg, **extra) if extra else cfg

    def build(self, cfg: ModelConfig, machine: str | None = None) -> MachineDefinition:
        return MACHINES[machine or self.machine](cfg)

    def trace(self, machine: MachineDefinition) -> tuple[Trace, list[int]]:
        """The parsed steps and the line each came from."""
        trace = Trace()
        lines = []
        for lineno, col, text in self.steps:
            try:
                trace.append(*parse_step(text, machine))
            except StepSyntaxError as exc:
                raise ScenarioError(lineno, col + exc.column - 1, exc.reason) from None
            lines.append(lineno)
        return trace, lines


def variant_setting(name: str, value: str) -> tuple[str, object]:
    """Map ``add-content=literal`` style flags to a ModelConfig field."""
    if name not in VARIANTS:
        raise ValueError(f"unknown variant {name!r} (known: {', '.join(VARIANTS)})")
    key = VARIANTS[name]
    if key == "symmetric_chat":
        if value.lower() not in _BOOLS:
            raise ValueError(f"symmetric-chat takes on/off, got {value!r}")
        return key, _BOOLS[value.lower()]
    ModelConfig(**{key: value})
    return key, value


def parse_scenario(text: str) -> Scenario:
    sc = Scenario()
    seen_step = False
    last_header = 1
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        col = raw.index(stripped[0]) + 1
        words = stripped.split()
        head = words[0]
        if head == "expect":
            sc.expectations.append(_expectation(words, lineno, col))
        elif head in _HEADER:
            if seen_step:
                raise ScenarioError(lineno, col, f"{head!r} must come before the first step")
            _directive(sc, words, lineno, col, raw)
            last_header = lineno
        else:
            seen_step = True
            sc.steps.append((lineno, col, stripped))
    _check_config(sc, last_header)
    return sc


def _expectation(words, lineno, col) -> Expectation:
    if len(words) < 2 or words[1] not in VERDICTS:
        raise ScenarioError(lineno, col, f"expect takes one of {', '.join(VERDICTS)}")
    if words[1] != "invariant-violation" and len(words) > 2:
        raise ScenarioError(lineno, col, f"expect {words[1]} takes no labels")
    return Expectation(words[1], tuple(words[2:]), lineno)


def _directive(sc: Scenario, words, lineno, col, raw) -> None:
    head, args = words[0], words[1:]

    def arg_col(i: int) -> int:
        # column of the i-th argument on the raw line
        pos = raw.index(head) + len(head)
        for j, w in enumerate(args):
            pos = raw.index(w, pos)
            if j == i:
                return pos + 1
            pos += len(w)
        return len(raw) + 1

    if head == "machine":
        if len(args) != 1 or args[0] not in MACHINES:
            raise ScenarioError(lineno, arg_col(0), f"machine takes one of {', '.join(MACHINES)}")
        sc.machine = args[0]
    elif head in ("users", "contents"):
        for i, w in enumerate(args):
            if not is_atom(w):
                raise ScenarioError(lineno, arg_col(i), f"{w!r} is not an atom")
        sc.settings[head] = tuple(args)
    elif head == "max-subset":
        if len(args) != 1 or not args[0].isdigit():
            raise ScenarioError(lineno, arg_col(0), "max-subset takes a natural number")
        sc.settings["max_subset"] = int(args[0])
    else:
        for i, token in enumerate(args):
            name, eq, value = token.partition("=")
            if not eq:
                # a bare flag switches it on
                value = "on"
            try:
                key, val = variant_setting(name, value)
            except ValueError as exc:
                raise ScenarioError(lineno, arg_col(i), str(exc)) from None
            sc.settings[key] = val


def _check_config(sc: Scenario, lineno: int) -> None:
    # pool clashes only show once the whole header is known
    try:
        ModelConfig(**sc.settings)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(lineno, 1, f"bad header: {exc}") from None


def header_lines(machine: str, cfg: ModelConfig) -> list[str]:
    """Header that :func:`parse_scenario` turns back into ``cfg``."""
    sym = "on" if cfg.symmetric_chat else "off"
    return [
        f"machine {machine}",
        "users " + " ".join(cfg.users) if cfg.users else "users",
        "contents " + " ".join(cfg.contents) if cfg.contents else "contents",
        f"max-subset {cfg.max_subset}",
        f"variant add-content={cfg.add_content} remove-content={cfg.remove_content} "
        f"forward={cfg.forward} broadcast={cfg.broadcast} symmetric-chat={sym}",
    ]
