"""The concrete WhatsApp machine: sequential content and per-chat screens.

Superposition refinement of :mod:`whatsapp_abstract`.  All six abstract
variables are kept, and three are added::

    csize     number of content items
    contents  1..csize ↠ content           (content as a sequence)
    screen    user ⇸ (user ⇸ (ℕ ⇸ content)) (what u1 sees of its chat with u2)

Every concrete event computes its abstract part with the abstract action on
the same pre-state and then adds its own assignments, so the projection of a
concrete step is exactly an abstract step.

Index parameters (``k1``, ``k2``, ``k``, ``i``) are supplied by the
scheduler as "one past the largest index in the cell"; any other natural is
still accepted by :func:`machine.step` so that the guards can be exercised
directly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import whatsapp_abstract as wa
from .machine import EventDescriptor, MachineDefinition, extend_bindings
from .relkernel import (
    EMPTY,
    FSet,
    apply,
    dom,
    dom_subtract,
    fs,
    image,
    inverse,
    is_functional,
    is_pairs,
    is_surjective,
    override,
    ran,
    segment,
)
from .whatsapp_abstract import AbstractState, ModelConfig


@dataclass(frozen=True)
class ConcreteState(AbstractState):
    csize: int = 0
    contents: FSet = EMPTY
    screen: FSet = EMPTY


class MissingCell(LookupError):
    def __init__(self, u1, u2):
        super().__init__(f"no screen for {u1} with {u2}")
        self.u1 = u1
        self.u2 = u2


# -- screen helpers -------------------------------------------------------


def _in_dom(r: FSet, x) -> bool:
    return bool(r.lookup(x))


def has_cell(s, u1, u2) -> bool:
    return _in_dom(s.screen, u1) and _in_dom(apply(s.screen, u1), u2)


def cell(s, u1, u2) -> FSet:
    """``screen(u1)(u2)``"""
    return apply(apply(s.screen, u1), u2)


def next_index(s, u1, u2) -> int:
    """One past the largest index of the cell (1 for a missing or empty cell)."""
    if not has_cell(s, u1, u2):
        return 1
    idx = [k for k, _ in cell(s, u1, u2).raw]
    return max(idx, default=0) + 1


def read_chat(s, u1, u2) -> list:
    """Content of ``u1``'s screen with ``u2``, in index order."""
    if not has_cell(s, u1, u2):
        raise MissingCell(u1, u2)
    return [c for _, c in sorted(cell(s, u1, u2).raw, key=lambda p: p[0])]


def _set_cells(screen: FSet, owner, updates: dict) -> FSet:
    """``screen ⊕ {owner ↦ (screen(owner) ⊕ updates)}``"""
    row = apply(screen, owner) if _in_dom(screen, owner) else EMPTY
    return override(screen, fs((owner, override(row, FSet(updates.items())))))


def _is_nat(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool) and x >= 0


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _synced(post_content: FSet, contents: FSet, screen: FSet):
    """Keep ``contents`` and the screens consistent with a shrunken ``content``.

    Items no longer in ``content`` leave the sequence and every screen cell.
    The sequence is then renumbered without holes (later items shift down).
    """
    kept = [c for _, c in sorted(contents.raw, key=lambda p: p[0]) if c in post_content]
    new_contents = FSet(enumerate(kept, 1))
    new_screen = FSet(
        (u1, FSet((u2, FSet(p for p in cl.raw if p[1] in post_content)) for u2, cl in row.raw))
        for u1, row in screen.raw
    )
    return len(kept), new_contents, new_screen


# -- invariants -----------------------------------------------------------


def _partial_fn_on(r, keys) -> bool:
    # r is a relation, functional, with dom(r) ⊆ keys
    seen = set()
    for p in r.raw:
        if not (isinstance(p, tuple) and len(p) == 2) or p[0] in seen or p[0] not in keys:
            return False
        seen.add(p[0])
    return True


def _invr24(s) -> bool:
    users, content = s.user.raw, s.content.raw
    if not (isinstance(s.screen, FSet) and _partial_fn_on(s.screen, users)):
        return False
    for _, row in s.screen.raw:
        if not (isinstance(row, FSet) and _partial_fn_on(row, users)):
            return False
        for _, cl in row.raw:
            if not (isinstance(cl, FSet) and _cell_ok(cl, content)):
                return False
    return True


def _cell_ok(cl, content) -> bool:
    # a partial function from naturals into content; hot, so done by hand
    seen = set()
    for p in cl.raw:
        if type(p) is not tuple or len(p) != 2:
            return False
        k, c = p
        if type(k) is not int or k < 0 or k in seen or c not in content:
            return False
        seen.add(k)
    return True


def concrete_invariants(cfg: ModelConfig):
    return wa.abstract_invariants(cfg) + (
        ("invr21", lambda s: _is_nat(s.csize)),
        ("invr22", lambda s: is_surjective(s.contents, segment(1, s.csize), s.content)),
        ("invr23", lambda s: s.content == ran(s.contents)),
        ("invr24", _invr24),
    )


def screen_gluing_diagnostic(s) -> list[tuple]:
    """Screen entries whose content is held by nobody in ``chatcontent``.

    Not an invariant: no gluing between ``screen`` and ``chatcontent`` is
    fixed, so this only reports ``(u1, u2, c)`` triples for inspection.
    """
    held = set()
    for _, inner in s.chatcontent.raw:
        held.update(c for c, _ in inner.raw)
    out = []
    for u1, row in s.screen:
        for u2, cl in row:
            out.extend((u1, u2, c) for _, c in cl if c not in held)
    return out


# -- events ---------------------------------------------------------------


def _refine(abstract: EventDescriptor, name: str, extra_params=(), extra_guard=None, extra_action=None):
    """Build a concrete event from its abstract counterpart.

    ``extra_guard(s, b)`` strengthens the abstract guard; ``extra_action(pre,
    post, b)`` returns the concrete assignments, computed from the pre-state
    (``post`` only carries the abstract results, e.g. the new ``content``).
    """

    def guard(s, b):
        ab = {p: b[p] for p in abstract.param_names}
        return abstract.guard(s, ab) and (extra_guard is None or extra_guard(s, b))

    def action(s, b):
        ab = {p: b[p] for p in abstract.param_names}
        post = abstract.action(s, ab)
        if extra_action is None:
            return post
        return replace(post, **extra_action(s, post, b))

    fast = None
    if abstract.fast is not None:
        extra = tuple(extra_params)

        def fast(s):
            for ab in abstract.fast(s):
                for b in extend_bindings(extra, s, ab):
                    if extra_guard is None or extra_guard(s, b):
                        yield b

    return EventDescriptor(
        name, abstract.params + tuple(extra_params), guard, action,
        refines=abstract.name, fast=fast,
    )


def refine_add_user(cfg, abstract):
    # every user gets an (empty) screen row, so chatting can ever be enabled
    def act(s, post, b):
        return {"screen": override(s.screen, fs((b["u"], EMPTY)))}

    return _refine(abstract, "add_user", extra_action=act)


def refine_add_content(cfg, abstract):
    def act(s, post, b):
        n = s.csize + 1
        return {"csize": n, "contents": override(s.contents, fs((n, b["c"])))}

    return _refine(abstract, "add_content", extra_action=act)


def refine_create_chat_session(cfg, abstract):
    def grd(s, b):
        return _in_dom(s.screen, b["u1"])

    def act(s, post, b):
        u1, u2 = b["u1"], b["u2"]
        existing = cell(s, u1, u2) if has_cell(s, u1, u2) else EMPTY
        return {"screen": _set_cells(s.screen, u1, {u2: existing})}

    return _refine(abstract, "create_chat_session", extra_guard=grd, extra_action=act)


def _append_content(s, c):
    return {"csize": s.csize + 1, "contents": override(s.contents, fs((s.csize + 1, c)))}


def refine_chatting(cfg, abstract):
    def grd(s, b):
        u1, u2, k1, k2 = b["u1"], b["u2"], b["k1"], b["k2"]
        return (
            _is_nat(k1)
            and _is_nat(k2)
            and has_cell(s, u1, u2)
            and not _in_dom(cell(s, u1, u2), k1)
            and has_cell(s, u2, u1)
            and not _in_dom(cell(s, u2, u1), k2)
        )

    def act(s, post, b):
        u1, u2, c, k1, k2 = b["u1"], b["u2"], b["c"], b["k1"], b["k2"]
        row1 = override(apply(s.screen, u1), fs((u2, override(cell(s, u1, u2), fs((k1, c))))))
        row2 = override(apply(s.screen, u2), fs((u1, override(cell(s, u2, u1), fs((k2, c))))))
        return {"screen": override(s.screen, fs((u1, row1), (u2, row2)))} | _append_content(s, c)

    params = (
        ("k1", lambda s, b: (next_index(s, b["u1"], b["u2"]),)),
        ("k2", lambda s, b: (next_index(s, b["u2"], b["u1"]),)),
    )
    return _refine(abstract, "chatting_refined", params, grd, act)


def refine_chatting_first_time(cfg, abstract):
    def grd(s, b):
        u1, u2, k1, k2 = b["u1"], b["u2"], b["k1"], b["k2"]
        return (
            _is_nat(k1)
            and _is_int(k2)
            and has_cell(s, u1, u2)
            and not _in_dom(cell(s, u1, u2), k1)
            and _in_dom(s.screen, u2)
            and not _in_dom(apply(s.screen, u2), u1)
        )

    def act(s, post, b):
        u1, u2, c, k1, k2 = b["u1"], b["u2"], b["c"], b["k1"], b["k2"]
        row1 = override(apply(s.screen, u1), fs((u2, override(cell(s, u1, u2), fs((k1, c))))))
        row2 = override(apply(s.screen, u2), fs((u1, fs((k2, c)))))
        return {"screen": override(s.screen, fs((u1, row1), (u2, row2)))} | _append_content(s, c)

    params = (
        ("k1", lambda s, b: (next_index(s, b["u1"], b["u2"]),)),
        ("k2", lambda s, b: (next_index(s, b["u2"], b["u1"]),)),
    )
    return _refine(abstract, "chatting_first_time", params, grd, act)


def refine_delete_content(cfg, abstract):
    def grd(s, b):
        u1, u2, c, i, k = b["u1"], b["u2"], b["c"], b["i"], b["k"]
        return (i, c) in s.contents and has_cell(s, u1, u2) and (k, c) in cell(s, u1, u2)

    def act(s, post, b):
        u1, u2, k = b["u1"], b["u2"], b["k"]
        return {"screen": _set_cells(s.screen, u1, {u2: dom_subtract(fs(k), cell(s, u1, u2))})}

    def cell_indices(s, b):
        if not has_cell(s, b["u1"], b["u2"]):
            return ()
        return image(inverse(cell(s, b["u1"], b["u2"])), fs(b["c"]))

    params = (
        ("i", lambda s, b: image(inverse(s.contents), fs(b["c"]))),
        ("k", cell_indices),
    )
    return _refine(abstract, "delete_content_refined", params, grd, act)


def refine_remove_content(cfg, abstract):
    # only the case where nobody else holds c: the sequence can then be
    # compacted without any search through other users' content
    def grd(s, b):
        u1, c = b["u1"], b["c"]
        if (b["i"], c) not in s.contents:
            return False
        return all(
            a == u1 or not _in_dom(inner, c) for a, inner in s.chatcontent.raw
        )

    def act(s, post, b):
        n, contents, screen = _synced(post.content, s.contents, s.screen)
        return {"csize": n, "contents": contents, "screen": screen}

    params = (("i", lambda s, b: image(inverse(s.contents), fs(b["c"]))),)
    return _refine(abstract, "remove_content_refined", params, grd, act)


def _max_target_index(s, u, us) -> int:
    top = 0
    for u2 in us:
        if has_cell(s, u, u2):
            top = max([top] + [k for k, _ in cell(s, u, u2).raw])
    return top


def _has_send_cells(s, u, us, need_cells: bool) -> bool:
    if not _in_dom(s.screen, u):
        return False
    return not need_cells or us <= dom(apply(s.screen, u))


def _send_grd(need_cells: bool):
    def grd(s, b):
        u, us, k = b["u"], b["us"], b["k"]
        if not (_is_nat(k) and _has_send_cells(s, u, us, need_cells)):
            return False
        row = apply(s.screen, u)
        return all(k > i for u2 in us if _in_dom(row, u2) for i, _ in cell(s, u, u2).raw)

    return grd


def _send_act(s, post, b):
    u, us, c, k = b["u"], b["us"], b["c"], b["k"]
    updates = {}
    for u2 in us:
        existing = cell(s, u, u2) if has_cell(s, u, u2) else EMPTY
        updates[u2] = override(existing, fs((k, c)))
    return {"screen": _set_cells(s.screen, u, updates)}


_SEND_PARAMS = (("k", lambda s, b: (_max_target_index(s, b["u"], b["us"]) + 1,)),)


def _send_event(cfg, abstract, name: str, need_cells: bool) -> EventDescriptor:
    ev = _refine(abstract, name, _SEND_PARAMS, _send_grd(need_cells), _send_act)
    groups = wa.send_groups(cfg, need_session=need_cells)

    # k and the concrete guard ignore c, so they are settled once per
    # (u, us); k is above every target index by construction
    def fast(s):
        contents = s.content.sorted()
        if not contents:
            return
        for u, us in groups(s):
            if _has_send_cells(s, u, us, need_cells):
                k = _max_target_index(s, u, us) + 1
                for c in contents:
                    yield {"u": u, "us": us, "c": c, "k": k}

    return replace(ev, fast=fast)


def refine_forward(cfg, abstract):
    return _send_event(cfg, abstract, "forward_refined", need_cells=True)


def refine_broadcast(cfg, abstract):
    # missing sender-side cells are created (empty) before insertion
    return _send_event(cfg, abstract, "broadcast_refined", need_cells=False)


def refine_delete_chat_session(cfg, abstract):
    def act(s, post, b):
        u1, u2 = b["u1"], b["u2"]
        screen = s.screen
        if _in_dom(screen, u1):
            screen = override(screen, fs((u1, dom_subtract(fs(u2), apply(screen, u1)))))
        if post.content == s.content:
            return {"screen": screen}
        n, contents, screen = _synced(post.content, s.contents, screen)
        return {"csize": n, "contents": contents, "screen": screen}

    return _refine(abstract, "delete_chat_session", extra_action=act)


def _inherited(cfg, abstract):
    return abstract


REFINEMENTS = {
    "add_user": (refine_add_user,),
    "add_content": (refine_add_content,),
    "create_chat_session": (refine_create_chat_session,),
    "select_chat": (_inherited,),
    "unselect_chat": (_inherited,),
    "chatting": (refine_chatting, refine_chatting_first_time),
    "delete_content": (refine_delete_content,),
    "remove_content": (refine_remove_content,),
    "mute_chat": (_inherited,),
    "unmute_chat": (_inherited,),
    "forward": (refine_forward,),
    "broadcast": (refine_broadcast,),
    "delete_chat_session": (refine_delete_chat_session,),
}


def build_machine2(cfg: ModelConfig | None = None) -> MachineDefinition:
    cfg = cfg or ModelConfig()
    abstract = wa.build_machine0(cfg)
    events = []
    for ev in abstract.events:
        for make in REFINEMENTS[ev.name]:
            events.append(make(cfg, ev))
    return MachineDefinition(
        name="machine2",
        initial=ConcreteState,
        events=tuple(events),
        invariants=concrete_invariants(cfg),
        abstraction=wa.project,
        terminal=wa.pools_exhausted(cfg),
        dump=wa.dump_state,
    )


def load_concrete_state(text: str) -> ConcreteState:
    return wa.load_state(text, ConcreteState)


__all__ = [
    "ConcreteState",
    "MissingCell",
    "build_machine2",
    "cell",
    "has_cell",
    "load_concrete_state",
    "next_index",
    "read_chat",
    "screen_gluing_diagnostic",
]
