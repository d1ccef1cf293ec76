"""Acceptance criteria, one test each, with their limits pinned below.

Every test logs a ``criterion N: PASS|FAIL`` line (shown in the summary
at the end of the pytest run).  A criterion that the models cannot meet is
left failing rather than relaxed.
"""

import io
import random
from dataclasses import replace

from hypothesis import given, settings
from hypothesis import strategies as st

from eventkit.checker import CheckConfig, Verdict, bfs_check, deadlock_probe, explore, refine_check
from eventkit.cli import main
from eventkit.machine import check_invariants, enabled, parse_step, replay, step, walk
from eventkit.mutants import MUTANTS
from eventkit.relkernel import (
    FSet,
    apply_or,
    compose,
    cross,
    dom,
    dom_restrict,
    dom_subtract,
    identity,
    image,
    inverse,
    is_bijection,
    is_injective,
    is_partial_function,
    is_surjective,
    is_total_function,
    override,
    ran,
    ran_restrict,
    ran_subtract,
)
from eventkit.whatsapp_abstract import AbstractState, ModelConfig, build_machine0, dump_state
from eventkit.whatsapp_concrete import build_machine2, next_index, read_chat

import oracles as o

# pinned limits
RELATIONS = 1_000
MAX_UNIVERSE = 6
BUDGET_RELATIONS = 10.0
WALK_STEPS = 10_000
WALK_USERS, WALK_CONTENTS = 4, 8
BUDGET_WALKS = 60.0
INV5_MAX_LENGTH = 4
DELETE_MAX_DEPTH = 6
ADD_CONTENT_MAX_DEPTH = 3
BUDGET_MUTATION = 30.0
REFINE_DEPTH, REFINE_USERS, REFINE_CONTENTS = 5, 3, 4
MAX_MESSAGES = 20
DETERMINISM_WORKERS = 4


def mutant(name, cfg):
    return MUTANTS[name][1](cfg)


def run_cli(*argv):
    out = io.StringIO()
    status = main([str(a) for a in argv], out)
    return status, out.getvalue()


# -- 1 ------------------------------------------------------------------------


def _random_case(rng):
    n = rng.randint(0, MAX_UNIVERSE)
    universe = rng.sample(["a", "b", "c", "d", 1, 2, 3, 4], n)
    pairs = [(x, y) for x in universe for y in universe]

    def some_rel():
        return set(p for p in pairs if rng.random() < rng.random())

    def some_set():
        return set(x for x in universe if rng.random() < 0.5)

    return some_rel(), some_rel(), some_set(), some_set(), universe


def test_1_relational_operators_match_brute_force(criterion):
    with criterion("1", BUDGET_RELATIONS) as notes:
        rng = random.Random(20240611)
        checked = 0
        for _ in range(RELATIONS):
            r, q, s, t, universe = _random_case(rng)
            R, Q, S, T = FSet(r), FSet(q), FSet(s), FSet(t)
            assert image(R, S).raw == o.o_image(r, s)
            assert override(R, Q).raw == o.o_override(r, q)
            assert dom_restrict(S, R).raw == o.o_dom_restrict(s, r)
            assert dom_subtract(S, R).raw == o.o_dom_subtract(s, r)
            assert ran_restrict(R, S).raw == o.o_ran_restrict(r, s)
            assert ran_subtract(R, S).raw == o.o_ran_subtract(r, s)
            assert compose(Q, R).raw == o.o_compose(q, r)
            assert identity(S).raw == o.o_identity(s)
            assert inverse(R).raw == o.o_inverse(r)
            assert dom(R).raw == o.o_dom(r)
            assert ran(R).raw == o.o_ran(r)
            assert cross(S, T).raw == o.o_cross(s, t)
            assert is_partial_function(R, S, T) == o.o_partial(r, s, t)
            assert is_total_function(R, S, T) == o.o_total(r, s, t)
            assert is_injective(R, S, T) == o.o_injective(r, s, t)
            assert is_surjective(R, S, T) == o.o_surjective(r, s, t)
            assert is_bijection(R, S, T) == o.o_bijection(r, s, t)
            for x in universe:
                if len([p for p in r if p[0] == x]) <= 1:
                    assert apply_or(R, x, None) == o.o_apply(r, x)
            # short forms
            assert dom_restrict(S, R) == compose(identity(S), R)
            assert dom_subtract(S, R) == dom_restrict(dom(R) - S, R)
            # id(s);r would restrict the domain, so range restriction is r;id(s)
            assert ran_restrict(R, S) == compose(R, identity(S))
            assert ran_subtract(R, S) == ran_restrict(R, ran(R) - S)
            assert image(R, S) == ran(dom_restrict(S, R))
            assert override(R, Q) == Q | dom_subtract(dom(Q), R)
            checked += 1
        notes.append(f"{checked} cases over universes of <= {MAX_UNIVERSE}")


# -- 2 ------------------------------------------------------------------------


def test_2_random_walks_preserve_invariants(criterion):
    cfg = ModelConfig.sized(WALK_USERS, WALK_CONTENTS)
    with criterion("2", BUDGET_WALKS) as notes:
        for build in (build_machine0, build_machine2):
            m = build(cfg)
            trace, final = walk(m, WALK_STEPS, seed=1)
            # walk raises on the first violated invariant, so reaching here
            # means every visited state passed; the final one is rechecked
            assert check_invariants(m, final) == []
            assert len(trace) == WALK_STEPS, f"{m.name} halted after {len(trace)} steps"
            notes.append(f"{m.name}: {len(trace)} steps, 0 violations")


# -- 3 ------------------------------------------------------------------------


def test_3a_select_chat_union_gives_short_inv5_counterexample(criterion):
    with criterion("3a", BUDGET_MUTATION) as notes:
        m = mutant("select-chat-union", ModelConfig.sized(2, 2))
        r = bfs_check(m, CheckConfig(max_depth=8))
        assert r.verdict is Verdict.INVARIANT_VIOLATION and "inv5" in r.labels
        assert replay(m, r.trace) == r.state
        notes.append(f"inv5 found, counterexample length {len(r.trace)}")
        # two sessions from one user need two add_user steps and two
        # create_chat_session steps before select_chat can fire
        assert len(r.trace) <= INV5_MAX_LENGTH, (
            f"shortest inv5 counterexample has {len(r.trace)} steps, limit {INV5_MAX_LENGTH}"
        )


FORWARDED = (
    "add_user A",
    "add_user B",
    "create_chat_session A B",
    "chatting A B c1",
    "forward B {A} c1",
    "delete_content A B c1",
)


def test_3b_delete_content_dropping_content_is_caught(criterion):
    with criterion("3b", BUDGET_MUTATION) as notes:
        cfg = ModelConfig.sized(3, 3)
        m = mutant("delete-content-drops-content", cfg)
        r = bfs_check(m, CheckConfig(max_depth=DELETE_MAX_DEPTH))
        assert r.verdict is Verdict.INVARIANT_VIOLATION
        assert r.depth <= DELETE_MAX_DEPTH
        assert replay(m, r.trace) == r.state
        notes.append(f"bfs: {' '.join(r.labels)} at depth {r.depth}")
        # the forwarded-content path: B still holds c1 after A deletes it
        s = m.initial()
        for line in FORWARDED:
            s = step(m, s, *parse_step(line, m))
        assert "c1" not in s.content
        assert "inv4" in check_invariants(m, s)
        assert len(FORWARDED) <= DELETE_MAX_DEPTH
        shipped = build_machine0(cfg)
        s = shipped.initial()
        for line in FORWARDED:
            s = step(shipped, s, *parse_step(line, shipped))
        assert check_invariants(shipped, s) == []
        notes.append(f"forwarded path: inv4 after {len(FORWARDED)} steps")


def test_3c_literal_add_content_breaks_inv4(criterion):
    with criterion("3c", BUDGET_MUTATION) as notes:
        m = build_machine0(ModelConfig.sized(2, 2, add_content="literal"))
        r = bfs_check(m, CheckConfig(max_depth=8))
        assert r.verdict is Verdict.INVARIANT_VIOLATION and "inv4" in r.labels
        assert replay(m, r.trace) == r.state
        notes.append(f"inv4 at depth {r.depth}")
        assert r.depth <= ADD_CONTENT_MAX_DEPTH


# -- 4 ------------------------------------------------------------------------


def test_4_deadlock_examples(criterion):
    with criterion("4", BUDGET_MUTATION) as notes:
        empty = build_machine0(ModelConfig(users=(), contents=()))
        empty = empty.restrict(e.name for e in empty.events if e.name not in ("add_user", "add_content"))
        r = deadlock_probe(empty, CheckConfig(max_depth=5))
        assert r.verdict is Verdict.DEADLOCK and r.depth == 0
        notes.append("empty pools: deadlock at depth 0")

        r = deadlock_probe(build_machine0(ModelConfig.sized(2, 2)), CheckConfig(max_depth=5))
        assert r.verdict is Verdict.OK
        notes.append(f"open pools: ok to depth 5 ({r.states_explored} states)")

        m = build_machine0(ModelConfig.sized(2, 2))
        halted = AbstractState(
            user=FSet(["A", "B"]),
            content=FSet(["c1", "c2"]),
            chat=FSet([("A", "B"), ("B", "A")]),
            muted=FSet([("A", "B"), ("B", "A")]),
            chatcontent=FSet([("A", FSet()), ("B", FSet())]),
        )
        assert check_invariants(m, halted) == []
        only = m.restrict(["chatting", "select_chat"])
        r = deadlock_probe(replace(only, initial=lambda: halted), CheckConfig(max_depth=5))
        assert r.verdict is Verdict.DEADLOCK
        assert enabled(only, r.state) == []
        notes.append("exhausted and muted, chatting/select only: deadlock")


# -- 5 ------------------------------------------------------------------------


def test_5_refinement_conformance(criterion):
    cfg = ModelConfig.sized(REFINE_USERS, REFINE_CONTENTS)
    config = CheckConfig(max_depth=REFINE_DEPTH)
    with criterion("5", BUDGET_WALKS) as notes:
        m0, m2 = build_machine0(cfg), build_machine2(cfg)
        r = refine_check(m0, m2, config)
        assert r.verdict is Verdict.OK, r.render(dump_state)
        notes.append(f"shipped pair ok, {r.states_explored} states")

        seen = {m2.initial()}

        def gluing(pre, event, b, post):
            seen.add(post)
            return None if post.content == ran(post.contents) else "content != ran(contents)"

        g = explore(m2, config, gluing)
        assert g.verdict is Verdict.OK and len(seen) >= g.states_explored
        notes.append(f"content = ran(contents) in all {g.states_explored} states")

        for name, verdict in (
            ("chatting-without-contents", Verdict.INVARIANT_VIOLATION),
            ("chatting-without-reverse-chat", Verdict.REFINEMENT_VIOLATION),
        ):
            bad = mutant(name, cfg)
            r = refine_check(m0, bad, config)
            assert r.verdict is verdict, f"{name}: {r.verdict.value}"
            assert replay(bad, r.trace) == r.state
            notes.append(f"{name}: {r.headline()} in {len(r.trace)} steps")


# -- 6 ------------------------------------------------------------------------

ORDER_CFG = ModelConfig.sized(2, MAX_MESSAGES)
ORDER_M2 = build_machine2(ORDER_CFG)
OPEN = ("add_user A", "add_user B", "create_chat_session A B", "create_chat_session B A")


@settings(max_examples=200, deadline=None)
@given(
    senders=st.lists(st.sampled_from("AB"), max_size=MAX_MESSAGES),
    gaps=st.lists(st.tuples(st.integers(1, 5), st.integers(1, 5)), min_size=MAX_MESSAGES, max_size=MAX_MESSAGES),
    scheduler=st.booleans(),
)
def _ordering_property(senders, gaps, scheduler):
    m = ORDER_M2
    s = m.initial()
    for line in OPEN:
        s = step(m, s, *parse_step(line, m))
    sent = []
    for i, u1 in enumerate(senders):
        u2 = "B" if u1 == "A" else "A"
        c = ORDER_CFG.contents[i]
        if scheduler:
            k1, k2 = next_index(s, u1, u2), next_index(s, u2, u1)
        else:
            # any increasing indices will do, not just the next free one
            k1 = next_index(s, u1, u2) + gaps[i][0] - 1
            k2 = next_index(s, u2, u1) + gaps[i][1] - 1
        s = step(m, s, "chatting_refined", {"u1": u1, "u2": u2, "c": c, "k1": k1, "k2": k2})
        sent.append(c)
    assert read_chat(s, "A", "B") == sent
    assert read_chat(s, "B", "A") == sent


def test_6_read_chat_returns_send_order(criterion):
    with criterion("6", BUDGET_WALKS) as notes:
        _ordering_property()
        notes.append(f"200 traces of up to {MAX_MESSAGES} chatting_refined steps")


# -- 7 ------------------------------------------------------------------------


def test_7_determinism(criterion, tmp_path):
    with criterion("7", BUDGET_WALKS) as notes:
        scenario = tmp_path / "walk.scn"
        status, text = run_cli("simulate", "--steps", 500, "--seed", 42, "--machine", "m2")
        assert status == 0
        scenario.write_text(text)
        dump = tmp_path / "state.txt"
        dump.write_text("\n".join(line[4:] for line in text.splitlines() if line.startswith("#   ")) + "\n")
        commands = [
            ("simulate", "--steps", 500, "--seed", 42, "--machine", "m2"),
            ("run", scenario),
            ("check", "--users", 2, "--contents", 2, "--depth", 6),
            ("check", "--mutant", "select-chat-union", "--users", 2, "--contents", 2),
            ("check", "--deadlock", "--users", 1, "--contents", 1, "--depth", 6),
            ("refine", "--users", 2, "--contents", 3, "--depth", 4),
            ("refine", "--mutant", "chatting-without-reverse-chat", "--users", 2, "--contents", 2),
            ("read", "--state-dump", dump, "--u1", "A", "--u2", "B"),
        ]
        for argv in commands:
            first, second = run_cli(*argv), run_cli(*argv)
            assert first == second, f"{argv[0]} differs between runs"
            if argv[0] in ("check", "refine"):
                parallel = run_cli(*argv, "--workers", DETERMINISM_WORKERS)
                assert parallel == first, f"{' '.join(map(str, argv))} differs with workers"
        notes.append(f"{len(commands)} commands byte-identical, check/refine same with {DETERMINISM_WORKERS} workers")
