"""The abstract WhatsApp machine: users, content, chat sessions.

Variables::

    user         registered users                    (⊆ USER pool)
    content      existing content items              (⊆ CONTENT pool)
    chat         chat sessions, u1 ↦ u2              (user ↔ user)
    active       the active session of each user     (user ⇸ user)
    muted        muted sessions                      (user ↔ user)
    chatcontent  sender ↦ (content ↦ recipients)     (user ⇸ (content ⇸ ℙ(user)))

The carrier sets are finite pools fixed by :class:`ModelConfig`.  A few
events have documented alternative encodings selectable through the config;
the defaults are the encodings that keep every invariant.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, fields, replace
from typing import Literal

from .machine import EventDescriptor, MachineDefinition
from .relkernel import (
    EMPTY,
    FSet,
    apply,
    cross,
    dom,
    dom_subtract,
    fmt,
    fs,
    image,
    is_functional,
    is_pairs,
    is_partial_function,
    is_relation,
    override,
    parse_element,
    powerset,
)

AddContentMode = Literal["pointwise", "literal"]
RemoveContentMode = Literal["recompute", "verbatim"]
ForwardMode = Literal["merge", "literal"]
BroadcastMode = Literal["bidirectional", "literal"]


def default_users(n: int) -> tuple[str, ...]:
    if n <= 26:
        return tuple(string.ascii_uppercase[:n])
    return tuple(f"u{i}" for i in range(1, n + 1))


def default_contents(n: int) -> tuple[str, ...]:
    return tuple(f"c{i}" for i in range(1, n + 1))


@dataclass(frozen=True)
class ModelConfig:
    """Universe pools and encoding variants shared by both machines.

    ``add_content``
        ``pointwise`` extends every existing inner mapping with ``c ↦ ∅``;
        ``literal`` performs ``chatcontent ∪ (user × {{c ↦ ∅}})`` as written,
        which makes ``chatcontent`` non-functional as soon as it is non-empty.
    ``remove_content``
        ``recompute`` recomputes ``content`` from what is still held in
        ``chatcontent``; ``verbatim`` does ``content := content ∖ {c}``, which
        breaks inv4 when another user still holds ``c``.
    ``forward``
        ``merge`` adds ``us`` to the recipients of ``c``; ``literal`` performs
        ``chatcontent(u) ∪ {c ↦ us}``, which is non-functional when ``u``
        already holds ``c``.
    ``broadcast``
        ``bidirectional`` also creates the sender-side sessions ``{u} × us``
        so the recipients stay inside ``chat[{u}]`` (inv10); ``literal``
        creates only ``us × {u}``.
    ``symmetric_chat``
        chatting also records the content in the receiver's ``chatcontent``.
    """

    users: tuple[str, ...] = default_users(3)
    contents: tuple[str, ...] = default_contents(3)
    max_subset: int = 2
    symmetric_chat: bool = False
    add_content: AddContentMode = "pointwise"
    remove_content: RemoveContentMode = "recompute"
    forward: ForwardMode = "merge"
    broadcast: BroadcastMode = "bidirectional"

    @classmethod
    def sized(cls, n_users: int, n_contents: int, **kw) -> "ModelConfig":
        return cls(users=default_users(n_users), contents=default_contents(n_contents), **kw)

    def __post_init__(self):
        choices = {
            "add_content": ("pointwise", "literal"),
            "remove_content": ("recompute", "verbatim"),
            "forward": ("merge", "literal"),
            "broadcast": ("bidirectional", "literal"),
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.max_subset < 0:
            raise ValueError("max_subset must be >= 0")
        if len(set(self.users) | set(self.contents)) != len(self.users) + len(self.contents):
            raise ValueError("pool elements must be distinct")

    @property
    def user_pool(self) -> FSet:
        return FSet(self.users)

    @property
    def content_pool(self) -> FSet:
        return FSet(self.contents)


@dataclass(frozen=True)
class AbstractState:
    user: FSet = EMPTY
    content: FSet = EMPTY
    chat: FSet = EMPTY
    active: FSet = EMPTY
    muted: FSet = EMPTY
    chatcontent: FSet = EMPTY


ABSTRACT_VARIABLES = tuple(f.name for f in fields(AbstractState))


def project(state) -> AbstractState:
    """The six abstract variables of any (possibly refined) state."""
    return AbstractState(**{v: getattr(state, v) for v in ABSTRACT_VARIABLES})


# -- state dumps ----------------------------------------------------------


def dump_state(state) -> str:
    """One ``name = value`` line per variable, values in canonical form."""
    out = []
    for f in fields(state):
        out.append(f"{f.name} = {fmt(getattr(state, f.name))}\n")
    return "".join(out)


def load_state(text: str, cls=AbstractState):
    values = {}
    names = {f.name for f in fields(cls)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, eq, value = line.partition("=")
        name = name.strip()
        if not eq or name not in names:
            raise ValueError(f"line {lineno}: expected '<variable> = <value>' for one of {sorted(names)}")
        values[name] = parse_element(value.strip())
    missing = names - set(values)
    if missing:
        raise ValueError(f"state dump lacks {', '.join(sorted(missing))}")
    return cls(**values)


# -- helpers --------------------------------------------------------------


def cc(s, u) -> FSet:
    """``chatcontent(u)``"""
    return apply(s.chatcontent, u)


def _in_dom(r: FSet, x) -> bool:
    return bool(r.lookup(x))


def _users(s, b):
    return s.user


# -- invariants -----------------------------------------------------------


def _inv4(s) -> bool:
    if not is_partial_function(s.chatcontent, s.user, FSet(r for _, r in s.chatcontent.raw)):
        return False
    for _, inner in s.chatcontent.raw:
        if not (is_pairs(inner) and is_functional(inner)):
            return False
        for c, recipients in inner.raw:
            if c not in s.content:
                return False
            if not (isinstance(recipients, FSet) and recipients <= s.user):
                return False
    return True


def _inv10(s) -> bool:
    for u, inner in s.chatcontent.raw:
        partners = image(s.chat, fs(u))
        for _, recipients in inner.raw:
            if not recipients <= partners:
                return False
    return True


def abstract_invariants(cfg: ModelConfig):
    users, contents = cfg.user_pool, cfg.content_pool
    return (
        ("inv1", lambda s: s.user <= users),
        ("inv2", lambda s: s.content <= contents),
        ("inv3", lambda s: is_relation(s.chat, s.user, s.user)),
        ("inv4", _inv4),
        ("inv5", lambda s: is_partial_function(s.active, s.user, s.user)),
        ("inv6", lambda s: is_relation(s.muted, s.user, s.user)),
        ("inv7", lambda s: s.active <= s.chat),
        ("inv8", lambda s: s.muted <= s.chat),
        ("inv9", lambda s: s.muted.isdisjoint(s.active)),
        ("inv10", _inv10),
    )


# -- events ---------------------------------------------------------------
#
# Each guard evaluates its conjuncts left to right so that a later conjunct
# is only evaluated where the earlier ones make it well-defined.  Each
# action computes every right-hand side from the pre-state and installs them
# together with one ``replace``.


def _recomputed_content(chatcontent: FSet, skip=None) -> FSet:
    """``{cc,a,s · a ∈ dom(chatcontent) ∧ cc ↦ s ∈ chatcontent(a) ∧ ¬skip | cc}``"""
    out = set()
    for a, inner in chatcontent.raw:
        for c, _ in inner.raw:
            if skip is None or (a, c) != skip:
                out.add(c)
    return FSet(out)


def make_add_user(cfg: ModelConfig) -> EventDescriptor:
    pool = cfg.user_pool

    def guard(s, b):
        return b["u"] in pool and b["u"] not in s.user

    def action(s, b):
        u = b["u"]
        return replace(
            s,
            user=s.user.with_(u),
            chatcontent=override(s.chatcontent, fs((u, cross(s.content, fs(EMPTY))))),
        )

    return EventDescriptor("add_user", (("u", lambda s, b: pool - s.user),), guard, action)


def make_add_content(cfg: ModelConfig) -> EventDescriptor:
    pool = cfg.content_pool

    def guard(s, b):
        return b["c"] in pool and b["c"] not in s.content

    def action(s, b):
        c = b["c"]
        if cfg.add_content == "literal":
            new_cc = s.chatcontent | cross(s.user, fs(fs((c, EMPTY))))
        else:
            new_cc = FSet((u, override(inner, fs((c, EMPTY)))) for u, inner in s.chatcontent.raw)
        return replace(s, content=s.content.with_(c), chatcontent=new_cc)

    return EventDescriptor("add_content", (("c", lambda s, b: pool - s.content),), guard, action)


def make_create_chat_session(cfg: ModelConfig) -> EventDescriptor:
    def guard(s, b):
        u1, u2 = b["u1"], b["u2"]
        return u1 in s.user and u2 in s.user and (u1, u2) not in s.chat

    def action(s, b):
        pair = (b["u1"], b["u2"])
        return replace(s, chat=s.chat.with_(pair), active=override(s.active, fs(pair)))

    return EventDescriptor(
        "create_chat_session", (("u1", _users), ("u2", _users)), guard, action
    )


def make_select_chat(cfg: ModelConfig) -> EventDescriptor:
    def guard(s, b):
        u1, u2 = b["u1"], b["u2"]
        pair = (u1, u2)
        return (
            u1 in s.user
            and u2 in s.user
            and pair in s.chat
            and pair not in s.muted
            and pair not in s.active
        )

    def action(s, b):
        return replace(s, active=override(s.active, fs((b["u1"], b["u2"]))))

    return EventDescriptor(
        "select_chat",
        (("u1", lambda s, b: dom(s.chat)), ("u2", lambda s, b: image(s.chat, fs(b["u1"])))),
        guard,
        action,
    )


def make_unselect_chat(cfg: ModelConfig) -> EventDescriptor:
    def guard(s, b):
        u1, u2 = b["u1"], b["u2"]
        return u1 in s.user and u2 in s.user and (u1, u2) in s.chat and (u1, u2) in s.active

    def action(s, b):
        return replace(s, active=s.active.without((b["u1"], b["u2"])))

    return EventDescriptor(
        "unselect_chat",
        (("u1", lambda s, b: dom(s.active)), ("u2", lambda s, b: image(s.active, fs(b["u1"])))),
        guard,
        action,
    )


def _active_pair_domains():
    return (
        ("u1", lambda s, b: dom(s.active)),
        ("u2", lambda s, b: image(s.active, fs(b["u1"]))),
    )


def chatting_guard(cfg: ModelConfig):
    pool = cfg.content_pool

    def guard(s, b):
        u1, u2, c = b["u1"], b["u2"], b["c"]
        return (
            u1 in s.user
            and u2 in s.user
            and (u1, u2) in s.active
            and (u1, u2) not in s.muted
            and (u2, u1) not in s.muted
            and c in pool
            and c not in s.content
            and _in_dom(s.chatcontent, u1)
        )

    return guard


def make_chatting(cfg: ModelConfig) -> EventDescriptor:
    pool = cfg.content_pool

    def action(s, b):
        u1, u2, c = b["u1"], b["u2"], b["c"]
        updates = fs((u1, cc(s, u1).with_((c, fs(u2)))))
        if cfg.symmetric_chat:
            prior = cc(s, u2) if _in_dom(s.chatcontent, u2) else EMPTY
            updates = override(updates, fs((u2, prior.with_((c, fs(u1))))))
        return replace(
            s,
            content=s.content.with_(c),
            chat=s.chat.with_((u2, u1)),
            chatcontent=override(s.chatcontent, updates),
        )

    return EventDescriptor(
        "chatting",
        _active_pair_domains() + (("c", lambda s, b: pool - s.content),),
        chatting_guard(cfg),
        action,
    )


def content_edit_guard(s, b) -> bool:
    """Shared guard of delete_content and remove_content."""
    u1, u2, c = b["u1"], b["u2"], b["c"]
    if not (u1 in s.user and u2 in s.user and (u1, u2) in s.active and _in_dom(s.chatcontent, u1)):
        return False
    inner = cc(s, u1)
    return _in_dom(inner, c) and u2 in apply(inner, c)


def _edit_bindings(s):
    # same order as the domains: u1, then u2, then c
    for u1 in dom(s.active):
        if u1 not in s.user or not _in_dom(s.chatcontent, u1):
            continue
        inner = cc(s, u1)
        for u2 in image(s.active, fs(u1)):
            if u2 not in s.user:
                continue
            for c in dom(inner):
                if u2 in apply(inner, c):
                    yield {"u1": u1, "u2": u2, "c": c}


def _sent_by_u1(s, b):
    if not _in_dom(s.chatcontent, b["u1"]):
        return EMPTY
    return dom(cc(s, b["u1"]))


def make_delete_content(cfg: ModelConfig) -> EventDescriptor:
    def action(s, b):
        u1, u2, c = b["u1"], b["u2"], b["c"]
        inner = cc(s, u1)
        inner = override(inner, fs((c, apply(inner, c).without(u2))))
        return replace(s, chatcontent=override(s.chatcontent, fs((u1, inner))))

    return EventDescriptor(
        "delete_content",
        _active_pair_domains() + (("c", _sent_by_u1),),
        content_edit_guard,
        action,
        fast=_edit_bindings,
    )


def make_remove_content(cfg: ModelConfig) -> EventDescriptor:
    def action(s, b):
        u1, c = b["u1"], b["c"]
        if cfg.remove_content == "verbatim":
            content = s.content.without(c)
        else:
            content = _recomputed_content(s.chatcontent, skip=(u1, c))
        inner = dom_subtract(fs(c), cc(s, u1))
        return replace(s, content=content, chatcontent=override(s.chatcontent, fs((u1, inner))))

    return EventDescriptor(
        "remove_content",
        _active_pair_domains() + (("c", _sent_by_u1),),
        content_edit_guard,
        action,
        fast=_edit_bindings,
    )


def make_mute_chat(cfg: ModelConfig) -> EventDescriptor:
    def guard(s, b):
        u1, u2 = b["u1"], b["u2"]
        return u1 in s.user and u2 in s.user and (u1, u2) in s.chat and (u1, u2) not in s.muted

    def action(s, b):
        pair = (b["u1"], b["u2"])
        return replace(s, muted=s.muted.with_(pair), active=s.active.without(pair))

    return EventDescriptor(
        "mute_chat",
        (("u1", lambda s, b: dom(s.chat)), ("u2", lambda s, b: image(s.chat, fs(b["u1"])))),
        guard,
        action,
    )


def make_unmute_chat(cfg: ModelConfig) -> EventDescriptor:
    def guard(s, b):
        u1, u2 = b["u1"], b["u2"]
        return u1 in s.user and u2 in s.user and (u1, u2) in s.chat and (u1, u2) in s.muted

    def action(s, b):
        return replace(s, muted=s.muted.without((b["u1"], b["u2"])))

    return EventDescriptor(
        "unmute_chat",
        (("u1", lambda s, b: dom(s.muted)), ("u2", lambda s, b: image(s.muted, fs(b["u1"])))),
        guard,
        action,
    )


def _send_guard(s, b, need_session: bool) -> bool:
    u, us, c = b["u"], b["us"], b["c"]
    if not (u in s.user and isinstance(us, FSet) and us <= s.user):
        return False
    # muted[{u}] ∩ us = ∅ ∧ muted[us] ∩ {u} = ∅
    if any(x in us for x in s.muted.lookup(u)):
        return False
    if any(u in s.muted.lookup(x) for x in us.raw):
        return False
    if not (c in s.content and _in_dom(s.chatcontent, u)):
        return False
    # us ⊆ chat[{u}]
    return not need_session or all(x in s.chat.lookup(u) for x in us.raw)


def forward_guard(s, b) -> bool:
    return _send_guard(s, b, need_session=True)


def broadcast_guard(s, b) -> bool:
    return _send_guard(s, b, need_session=False)


def _send_chatcontent(cfg: ModelConfig, s, u, us, c) -> FSet:
    inner = cc(s, u)
    if cfg.forward == "literal":
        new_inner = inner.with_((c, us))
    else:
        prior = inner.lookup(c)
        recipients = us if not prior else apply(inner, c) | us
        new_inner = override(inner, fs((c, recipients)))
    return override(s.chatcontent, fs((u, new_inner)))


def _senders(s, b):
    return dom(s.chatcontent) & s.user


def send_groups(cfg: ModelConfig, need_session: bool):
    """Guard-passing ``(u, us)`` pairs of forward/broadcast, in binding order.

    Every content in ``content`` completes each pair to an enabled binding.
    Recipients muting u, or muted by u, can never be in us; pruning them up
    front leaves only pairs the guard accepts.
    """

    def groups(s):
        for u in _senders(s, {}).sorted():
            pool = (image(s.chat, fs(u)) & s.user) if need_session else s.user
            blocked = set(s.muted.lookup(u))
            blocked.update(x for x, y in s.muted.raw if y == u)
            for us in powerset(pool.without(*blocked), cfg.max_subset):
                yield u, us

    return groups


def _send_bindings(cfg: ModelConfig, need_session: bool):
    groups = send_groups(cfg, need_session)

    def fast(s):
        contents = s.content.sorted()
        for u, us in groups(s):
            for c in contents:
                yield {"u": u, "us": us, "c": c}

    return fast


def make_forward(cfg: ModelConfig) -> EventDescriptor:
    def action(s, b):
        u, us, c = b["u"], b["us"], b["c"]
        return replace(
            s,
            chatcontent=_send_chatcontent(cfg, s, u, us, c),
            chat=s.chat | cross(us, fs(u)),
        )

    return EventDescriptor(
        "forward",
        (
            ("u", _senders),
            ("us", lambda s, b: powerset(image(s.chat, fs(b["u"])) & s.user, cfg.max_subset)),
            ("c", lambda s, b: s.content),
        ),
        forward_guard,
        action,
        fast=_send_bindings(cfg, need_session=True),
    )


def make_broadcast(cfg: ModelConfig) -> EventDescriptor:
    def action(s, b):
        u, us, c = b["u"], b["us"], b["c"]
        chat = s.chat | cross(us, fs(u))
        if cfg.broadcast == "bidirectional":
            chat = chat | cross(fs(u), us)
        return replace(s, chatcontent=_send_chatcontent(cfg, s, u, us, c), chat=chat)

    return EventDescriptor(
        "broadcast",
        (
            ("u", _senders),
            ("us", lambda s, b: powerset(s.user, cfg.max_subset)),
            ("c", lambda s, b: s.content),
        ),
        broadcast_guard,
        action,
        fast=_send_bindings(cfg, need_session=False),
    )


def make_delete_chat_session(cfg: ModelConfig) -> EventDescriptor:
    """Deleting a session is one-sided.

    Drops the directed session ``u1 ↦ u2`` (and its active/muted marks) and
    strips ``u2`` from every recipient set of ``u1``.  ``u2``'s own view is
    left alone.
    """

    def guard(s, b):
        u1, u2 = b["u1"], b["u2"]
        return u1 in s.user and u2 in s.user and (u1, u2) in s.chat and (u1, u2) in s.active

    def action(s, b):
        u1, u2 = b["u1"], b["u2"]
        pair = (u1, u2)
        chatcontent = s.chatcontent
        if _in_dom(chatcontent, u1):
            stripped = FSet((c, rs.without(u2)) for c, rs in cc(s, u1).raw)
            chatcontent = override(chatcontent, fs((u1, stripped)))
        content = s.content
        if cfg.remove_content == "recompute":
            content = _recomputed_content(s.chatcontent)
        return replace(
            s,
            chat=s.chat.without(pair),
            active=s.active.without(pair),
            muted=s.muted.without(pair),
            chatcontent=chatcontent,
            content=content,
        )

    return EventDescriptor(
        "delete_chat_session",
        (("u1", lambda s, b: dom(s.active)), ("u2", lambda s, b: image(s.active, fs(b["u1"])))),
        guard,
        action,
    )


EVENT_BUILDERS = (
    make_add_user,
    make_add_content,
    make_create_chat_session,
    make_select_chat,
    make_unselect_chat,
    make_chatting,
    make_delete_content,
    make_remove_content,
    make_mute_chat,
    make_unmute_chat,
    make_forward,
    make_broadcast,
    make_delete_chat_session,
)


def pools_exhausted(cfg: ModelConfig):
    users, contents = cfg.user_pool, cfg.content_pool

    def terminal(s) -> bool:
        return s.user == users and s.content == contents

    return terminal


def build_machine0(cfg: ModelConfig | None = None) -> MachineDefinition:
    cfg = cfg or ModelConfig()
    return MachineDefinition(
        name="machine0",
        initial=AbstractState,
        events=tuple(make(cfg) for make in EVENT_BUILDERS),
        invariants=abstract_invariants(cfg),
        terminal=pools_exhausted(cfg),
        dump=dump_state,
    )

