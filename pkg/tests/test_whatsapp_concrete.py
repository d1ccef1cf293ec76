import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventkit.checker import refinement_hook
from eventkit.machine import DISABLED, check_invariants, enabled, parse_step, step, try_step
from eventkit.relkernel import EMPTY, apply, dom, fs, is_functional, ran, rel
from eventkit.whatsapp_abstract import ModelConfig, build_machine0, dump_state
from eventkit.whatsapp_concrete import (
    ConcreteState,
    MissingCell,
    build_machine2,
    cell,
    has_cell,
    load_concrete_state,
    next_index,
    read_chat,
    screen_gluing_diagnostic,
)

CFG = ModelConfig.sized(3, 4)
M2 = build_machine2(CFG)
M0 = build_machine0(CFG)


def run(*lines, state=None, m=M2):
    s = m.initial() if state is None else state
    for line in lines:
        s = step(m, s, *parse_step(line, m))
    return s


def fires(s, line, m=M2) -> bool:
    return try_step(m, s, *parse_step(line, m)) is not DISABLED


AB = ("add_user A", "add_user B", "create_chat_session A B")
BOTH_WAYS = AB + ("create_chat_session B A",)


# -- chatting ---------------------------------------------------------------


def test_chatting_refined_from_empty_screens():
    s = run(*BOTH_WAYS)
    assert s.csize == 0 and cell(s, "A", "B") == EMPTY and cell(s, "B", "A") == EMPTY
    s = run("chatting_refined B A c1 1 1", state=s)
    assert s.csize == 1
    assert s.contents == rel((1, "c1"))
    assert cell(s, "B", "A") == rel((1, "c1"))
    assert cell(s, "A", "B") == rel((1, "c1"))
    assert check_invariants(M2, s) == []


def test_chatting_refined_rejects_used_index():
    s = run(*BOTH_WAYS, "chatting_refined B A c1 1 1")
    assert not fires(s, "chatting_refined B A c2 1 2")
    assert not fires(s, "chatting_refined B A c2 2 1")
    assert fires(s, "chatting_refined B A c2 7 9")


def test_first_time_creates_receiver_cell():
    s = run(*AB)
    assert not has_cell(s, "B", "A")
    assert not fires(s, "chatting_refined A B c1 1 1")
    s = run("chatting_first_time A B c1 1 5", state=s)
    assert cell(s, "B", "A") == rel((5, "c1"))
    assert not fires(s, "chatting_first_time A B c2 2 6")


def test_first_time_accepts_any_integer_receiver_index():
    s = run(*AB, "chatting_first_time A B c1 1 -3")
    assert cell(s, "B", "A") == rel((-3, "c1"))
    # the typing of screens wants naturals, so invr24 objects
    assert "invr24" in check_invariants(M2, s)


def _reachable(m, seed, n):
    rng = random.Random(seed)
    s = m.initial()
    yield s
    for _ in range(n):
        ch = enabled(m, s)
        if not ch:
            return
        e, b = ch[rng.randrange(len(ch))]
        s = e.action(s, b)
        yield s


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_chatting_variants_partition_the_abstract_guard(seed):
    for s in _reachable(M2, seed, 40):
        abstract = {
            (b["u1"], b["u2"], b["c"]) for e, b in enabled(M0, _project(s)) if e.name == "chatting"
        }
        concrete = [
            (b["u1"], b["u2"], b["c"])
            for e, b in enabled(M2, s)
            if e.name in ("chatting_refined", "chatting_first_time")
        ]
        # never both, and only where the abstract event may fire
        assert len(concrete) == len(set(concrete))
        assert set(concrete) <= abstract
        for u1, u2, c in abstract:
            if has_cell(s, u1, u2) and s.screen.lookup(u2):
                assert (u1, u2, c) in concrete


def _project(s):
    return M2.abstraction(s)


# -- delete / remove ----------------------------------------------------------

TWO_ITEMS = BOTH_WAYS + ("chatting_refined B A c1 1 1", "chatting_refined B A c2 2 2")


def test_delete_content_refined():
    s = run(*TWO_ITEMS)
    assert cell(s, "B", "A") == rel((1, "c1"), (2, "c2"))
    t = run("delete_content_refined B A c1 1 1", state=s)
    assert cell(t, "B", "A") == rel((2, "c2"))
    assert t.contents == s.contents
    assert not fires(s, "delete_content_refined B A c1 1 2")
    assert not fires(s, "delete_content_refined B A c1 2 1")


def test_remove_content_refined_compacts_contents():
    s = run(*TWO_ITEMS)
    assert s.contents == rel((1, "c1"), (2, "c2"))
    t = run("remove_content_refined B A c1 1", state=s)
    assert t.contents == rel((1, "c2"))
    assert t.csize == 1
    assert all(c != "c1" for _, row in t.screen for _, cl in row for _, c in cl)
    assert check_invariants(M2, t) == []


def test_remove_content_refined_needs_sole_holder():
    # with symmetric chat the receiver holds c1 too
    sym = build_machine2(ModelConfig.sized(3, 4, symmetric_chat=True))
    s = run(*TWO_ITEMS, m=sym)
    assert "c1" in dom(apply(s.chatcontent, "A"))
    assert not fires(s, "remove_content_refined B A c1 1", m=sym)
    assert fires(run(*TWO_ITEMS), "remove_content_refined B A c1 1")


# -- forward / broadcast ------------------------------------------------------

THREE_SENT = AB + (
    "chatting_first_time A B c1 1 1",
    "chatting_refined A B c2 2 2",
    "chatting_refined A B c3 3 3",
)


def test_forward_index_must_exceed_target_cells():
    s = run(*THREE_SENT)
    assert next_index(s, "A", "B") == 4
    assert not fires(s, "forward_refined A {B} c1 3")
    assert fires(s, "forward_refined A {B} c1 4")
    t = run("forward_refined A {B} c1 4", state=s)
    assert (4, "c1") in cell(t, "A", "B")
    # the receiver side is left as it was
    assert cell(t, "B", "A") == cell(s, "B", "A")


def test_forward_needs_sender_cells():
    s = run(*THREE_SENT, "add_user C", "broadcast_refined A {C} c1 1")
    assert has_cell(s, "A", "C")
    s2 = run("add_user C", state=run(*THREE_SENT))
    assert not fires(s2, "forward_refined A {C} c1 1")


def test_broadcast_creates_missing_cell():
    s = run(*THREE_SENT, "add_user C")
    assert not has_cell(s, "A", "C")
    t = run("broadcast_refined A {C} c2 1", state=s)
    assert cell(t, "A", "C") == rel((1, "c2"))
    assert check_invariants(M2, t) == []


def test_broadcast_index_rule_and_mutes():
    s = run(*THREE_SENT)
    assert not fires(s, "broadcast_refined A {B} c1 2")
    m = run("mute_chat A B", state=s)
    assert not fires(m, "broadcast_refined A {B} c1 4")


# -- read_chat ----------------------------------------------------------------


def test_read_chat_orders_by_index():
    s = ConcreteState(
        user=fs("A", "B"),
        content=fs("c1", "c2"),
        screen=rel(("A", rel(("B", rel((2, "c2"), (1, "c1")))))),
    )
    assert read_chat(s, "A", "B") == ["c1", "c2"]


def test_read_chat_empty_and_missing():
    s = run(*AB)
    assert read_chat(s, "A", "B") == []
    with pytest.raises(MissingCell):
        read_chat(s, "B", "A")


def test_read_chat_is_stable():
    s = run(*THREE_SENT)
    same = load_concrete_state(dump_state(s))
    assert same == s
    assert read_chat(same, "A", "B") == read_chat(s, "A", "B") == ["c1", "c2", "c3"]


# -- properties over random traces --------------------------------------------


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_superposition_along_random_traces(seed):
    hook = refinement_hook(M0, M2)
    rng = random.Random(seed)
    s = M2.initial()
    for _ in range(60):
        ch = enabled(M2, s)
        if not ch:
            break
        e, b = ch[rng.randrange(len(ch))]
        t = e.action(s, b)
        assert hook(s, e, b, t) is None
        s = t


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_concrete_invariants_and_functional_cells(seed):
    for s in _reachable(M2, seed, 60):
        assert check_invariants(M2, s) == []
        assert s.content == ran(s.contents)
        for _, row in s.screen:
            for _, cl in row:
                assert is_functional(cl)


def test_gluing_diagnostic_reports_orphans():
    s = run(*TWO_ITEMS)
    assert screen_gluing_diagnostic(s) == []
    orphan = ConcreteState(screen=rel(("A", rel(("B", rel((1, "c9")))))))
    assert screen_gluing_diagnostic(orphan) == [("A", "B", "c9")]
