"""Seeded defects used as regression targets for the checkers.

Each mutant is a machine that differs from a shipped one in exactly one
event.  The checkers are expected to catch every one of them.
"""

from __future__ import annotations

from dataclasses import replace

from .machine import EventDescriptor, MachineDefinition
from .relkernel import fs
from .whatsapp_abstract import ModelConfig, build_machine0
from .whatsapp_concrete import build_machine2


def without_assignment(event: EventDescriptor, *variables: str) -> EventDescriptor:
    """Drop the assignments to ``variables`` from an event's action.

    Every variable is assigned by at most one action of an event, so
    restoring its pre-state value is the same as deleting that action.
    """
    inner = event.action

    def action(s, b):
        post = inner(s, b)
        return replace(post, **{v: getattr(s, v) for v in variables})

    return replace(event, action=action)


def select_chat_union(cfg: ModelConfig) -> MachineDefinition:
    """select_chat installs ``active ∪ {u1 ↦ u2}`` instead of overriding."""
    m = build_machine0(cfg)
    ev = m.event("select_chat")

    def action(s, b):
        return replace(s, active=s.active | fs((b["u1"], b["u2"])))

    return m.with_event(replace(ev, action=action))


def delete_content_drops_content(cfg: ModelConfig) -> MachineDefinition:
    """delete_content additionally performs ``content := content ∖ {c}``."""
    m = build_machine0(cfg)
    ev = m.event("delete_content")
    inner = ev.action

    def action(s, b):
        return replace(inner(s, b), content=s.content.without(b["c"]))

    return m.with_event(replace(ev, action=action))


def chatting_without_contents(cfg: ModelConfig) -> MachineDefinition:
    """Concrete chatting that forgets to append ``c`` to ``contents``."""
    m = build_machine2(cfg)
    for name in ("chatting_refined", "chatting_first_time"):
        m = m.with_event(without_assignment(m.event(name), "contents"))
    return m


def chatting_without_reverse_chat(cfg: ModelConfig) -> MachineDefinition:
    """Concrete chatting that skips the abstract ``chat := chat ∪ {u2 ↦ u1}``."""
    m = build_machine2(cfg)
    for name in ("chatting_refined", "chatting_first_time"):
        m = m.with_event(without_assignment(m.event(name), "chat"))
    return m


# name -> (machine kind, builder)
MUTANTS = {
    "select-chat-union": ("m0", select_chat_union),
    "delete-content-drops-content": ("m0", delete_content_drops_content),
    "chatting-without-contents": ("m2", chatting_without_contents),
    "chatting-without-reverse-chat": ("m2", chatting_without_reverse_chat),
}
