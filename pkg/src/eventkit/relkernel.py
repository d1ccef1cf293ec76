"""Finite sets and binary relations with Event-B style operators.

Elements are plain immutable Python values:

* ``int`` for naturals (sequence indices),
* ``str`` for atoms (users, content ids),
* 2-tuples for ordered pairs (maplets),
* :class:`FSet` for finite sets, which are themselves elements so that
  relations can nest (``chatcontent`` maps users to relations whose range
  holds sets of users).

A relation is simply an :class:`FSet` whose members are pairs.  Every value
has a total order (:func:`element_key`) so iteration and serialization are
canonical.
"""

from __future__ import annotations

import itertools
import re
from typing import Any, Callable, Hashable, Iterable, Iterator

Element = Hashable


class RelationError(ValueError):
    """A partial operation was used outside its definition domain."""

    def __init__(self, message: str, element: Element):
        super().__init__(message)
        self.element = element


class ApplicationOutsideDomain(RelationError):
    pass


class NonFunctionalAtPoint(RelationError):
    pass


def element_key(e: Element) -> tuple:
    # ints < atoms < pairs < sets; bool is rejected so True never aliases 1
    if isinstance(e, bool):
        raise TypeError("booleans are not elements")
    if isinstance(e, int):
        return (0, e)
    if isinstance(e, str):
        return (1, e)
    if isinstance(e, tuple):
        return (2, tuple(element_key(x) for x in e))
    if isinstance(e, FSet):
        return (3, e.sort_key())
    raise TypeError(f"unsupported element type: {type(e).__name__}")


class FSet:
    """Immutable finite set with canonical (sorted) iteration order."""

    __slots__ = ("_fs", "_sorted", "_key", "_index")

    def __init__(self, items: Iterable[Element] = ()):
        self._fs = items if isinstance(items, frozenset) else frozenset(items)
        self._sorted = None
        self._key = None
        self._index = None

    # -- set protocol -------------------------------------------------

    def __iter__(self) -> Iterator[Element]:
        return iter(self.sorted())

    def __len__(self) -> int:
        return len(self._fs)

    def __bool__(self) -> bool:
        return bool(self._fs)

    def __contains__(self, x: object) -> bool:
        return x in self._fs

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FSet):
            return self._fs == other._fs
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._fs)

    def __or__(self, other: "FSet") -> "FSet":
        return FSet(self._fs | other._fs)

    def __and__(self, other: "FSet") -> "FSet":
        return FSet(self._fs & other._fs)

    def __sub__(self, other: "FSet") -> "FSet":
        return FSet(self._fs - other._fs)

    def __le__(self, other: "FSet") -> bool:
        return self._fs <= other._fs

    def __lt__(self, other: "FSet") -> bool:
        return self._fs < other._fs

    def issubset(self, other: "FSet") -> bool:
        return self._fs <= other._fs

    def isdisjoint(self, other: "FSet") -> bool:
        return self._fs.isdisjoint(other._fs)

    def with_(self, *items: Element) -> "FSet":
        return FSet(self._fs.union(items))

    def without(self, *items: Element) -> "FSet":
        return FSet(self._fs.difference(items))

    @property
    def raw(self) -> frozenset:
        return self._fs

    # -- canonical order ----------------------------------------------

    def sorted(self) -> tuple:
        if self._sorted is None:
            self._sorted = tuple(sorted(self._fs, key=element_key))
        return self._sorted

    def sort_key(self) -> tuple:
        if self._key is None:
            self._key = tuple(element_key(x) for x in self.sorted())
        return self._key

    def lookup(self, x: Element) -> list:
        """All ``y`` with ``(x, y)`` in this relation (indexed on first use)."""
        if self._index is None:
            index: dict = {}
            for p in self._fs:
                index.setdefault(p[0], []).append(p[1])
            self._index = index
        return self._index.get(x, [])

    def __repr__(self) -> str:
        return f"FSet({fmt(self)})"

    def __str__(self) -> str:
        return fmt(self)


EMPTY = FSet()


def fs(*items: Element) -> FSet:
    return FSet(items)


def rel(*pairs: tuple) -> FSet:
    for p in pairs:
        if not (isinstance(p, tuple) and len(p) == 2):
            raise TypeError(f"not a pair: {p!r}")
    return FSet(pairs)


FiniteSet = FSet
FiniteRelation = FSet


def segment(lo: int, hi: int) -> FSet:
    """The natural-number interval ``lo..hi`` (empty when ``lo > hi``)."""
    return FSet(range(max(lo, 0), hi + 1))


# -- set operators ------------------------------------------------------


def union(a: FSet, b: FSet) -> FSet:
    return a | b


def inter(a: FSet, b: FSet) -> FSet:
    return a & b


def diff(a: FSet, b: FSet) -> FSet:
    return a - b


def cross(a: FSet, b: FSet) -> FSet:
    return FSet((x, y) for x in a.raw for y in b.raw)


def powerset(s: FSet, max_size: int | None = None) -> list[FSet]:
    """Subsets of ``s`` up to ``max_size`` elements, in canonical order."""
    items = s.sorted()
    top = len(items) if max_size is None else min(max_size, len(items))
    subsets = [FSet(c) for n in range(top + 1) for c in itertools.combinations(items, n)]
    return sorted(subsets, key=element_key)


# -- relation operators (argument order follows the notation) -----------


def dom(r: FSet) -> FSet:
    return FSet(p[0] for p in r.raw)


def ran(r: FSet) -> FSet:
    return FSet(p[1] for p in r.raw)


def identity(s: FSet) -> FSet:
    return FSet((x, x) for x in s.raw)


def inverse(r: FSet) -> FSet:
    return FSet((y, x) for x, y in r.raw)


def image(r: FSet, s: FSet) -> FSet:
    """``r[s]``"""
    if len(s) * 4 < len(r):
        return FSet(y for x in s.raw for y in r.lookup(x))
    keys = s.raw
    return FSet(y for x, y in r.raw if x in keys)


def dom_restrict(s: FSet, r: FSet) -> FSet:
    """``s ◁ r``"""
    keys = s.raw
    return FSet(p for p in r.raw if p[0] in keys)


def dom_subtract(s: FSet, r: FSet) -> FSet:
    """``s ⩤ r``"""
    keys = s.raw
    return FSet(p for p in r.raw if p[0] not in keys)


def ran_restrict(r: FSet, s: FSet) -> FSet:
    """``r ▷ s``"""
    vals = s.raw
    return FSet(p for p in r.raw if p[1] in vals)


def ran_subtract(r: FSet, s: FSet) -> FSet:
    """``r ⩥ s``"""
    vals = s.raw
    return FSet(p for p in r.raw if p[1] not in vals)


def override(r: FSet, q: FSet) -> FSet:
    """``r ⊕ q``: pairs of ``q`` plus pairs of ``r`` whose left side ``q`` leaves alone."""
    if not q:
        return r
    qdom = {p[0] for p in q.raw}
    return FSet(q.raw.union(p for p in r.raw if p[0] not in qdom))


def compose(q: FSet, r: FSet) -> FSet:
    """Forward composition ``q ; r``."""
    out = set()
    for x, y in q.raw:
        for z in r.lookup(y):
            out.add((x, z))
    return FSet(out)


def apply(f: FSet, x: Element) -> Element:
    """Function application ``f(x)``."""
    ys = f.lookup(x)
    if not ys:
        raise ApplicationOutsideDomain(f"{fmt(x)} is not in the domain", x)
    if len(ys) > 1:
        raise NonFunctionalAtPoint(f"relation maps {fmt(x)} to {len(ys)} values", x)
    return ys[0]


def apply_or(f: FSet, x: Element, default: Any) -> Any:
    ys = f.lookup(x)
    if len(ys) > 1:
        raise NonFunctionalAtPoint(f"relation maps {fmt(x)} to {len(ys)} values", x)
    return ys[0] if ys else default


# -- function-kind predicates -------------------------------------------


def is_pairs(r: Any) -> bool:
    return isinstance(r, FSet) and all(isinstance(p, tuple) and len(p) == 2 for p in r.raw)


def is_relation(r: FSet, a: FSet, b: FSet) -> bool:
    """``r ∈ a ↔ b``"""
    return is_pairs(r) and all(x in a.raw and y in b.raw for x, y in r.raw)


def is_functional(r: FSet) -> bool:
    seen = set()
    for x, _ in r.raw:
        if x in seen:
            return False
        seen.add(x)
    return True


def is_partial_function(r: FSet, a: FSet, b: FSet) -> bool:
    """``r ∈ a ⇸ b``"""
    return is_relation(r, a, b) and is_functional(r)


def is_total_function(r: FSet, a: FSet, b: FSet) -> bool:
    """``r ∈ a → b``"""
    return is_partial_function(r, a, b) and dom(r) == a


def is_injective(r: FSet, a: FSet, b: FSet) -> bool:
    """``r ∈ a ↣ b``: total, and no range element has two pre-images."""
    return is_total_function(r, a, b) and is_functional(inverse(r))


def is_surjective(r: FSet, a: FSet, b: FSet) -> bool:
    """``r ∈ a ↠ b``: total, with range exactly ``b``."""
    return is_total_function(r, a, b) and ran(r) == b


def is_bijection(r: FSet, a: FSet, b: FSet) -> bool:
    """``r ∈ a ⤖ b``"""
    return is_injective(r, a, b) and ran(r) == b


# -- canonical text form ------------------------------------------------

_ATOM = re.compile(r"[A-Za-z_][A-Za-z0-9_.-]*")
_INT = re.compile(r"-?[0-9]+")


def is_atom(text: str) -> bool:
    """Whether ``text`` is written as an atom (not a number)."""
    return bool(_ATOM.fullmatch(text))


def fmt(e: Element) -> str:
    if isinstance(e, FSet):
        return "{" + ",".join(fmt(x) for x in e.sorted()) + "}"
    if isinstance(e, tuple):
        return "(" + ",".join(fmt(x) for x in e) + ")"
    if isinstance(e, bool):
        raise TypeError("booleans are not elements")
    if isinstance(e, int):
        return str(e)
    if isinstance(e, str):
        if not _ATOM.fullmatch(e):
            raise ValueError(f"atom {e!r} has no canonical text form")
        return e
    raise TypeError(f"unsupported element type: {type(e).__name__}")


class ParseError(ValueError):
    def __init__(self, message: str, column: int):
        super().__init__(f"column {column}: {message}")
        self.column = column
        self.reason = message


def parse_element(text: str) -> Element:
    """Inverse of :func:`fmt`.  Whitespace is tolerated around tokens."""
    value, pos = _parse(text, _skip(text, 0))
    pos = _skip(text, pos)
    if pos != len(text):
        raise ParseError(f"unexpected {text[pos]!r}", pos + 1)
    return value


def _skip(text: str, pos: int) -> int:
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _parse(text: str, pos: int) -> tuple[Element, int]:
    if pos >= len(text):
        raise ParseError("unexpected end of input", pos + 1)
    ch = text[pos]
    if ch in "{(":
        close = "}" if ch == "{" else ")"
        items = []
        pos = _skip(text, pos + 1)
        if pos < len(text) and text[pos] == close:
            pos += 1
        else:
            while True:
                item, pos = _parse(text, pos)
                items.append(item)
                pos = _skip(text, pos)
                if pos >= len(text):
                    raise ParseError(f"missing {close!r}", pos + 1)
                if text[pos] == ",":
                    pos = _skip(text, pos + 1)
                    continue
                if text[pos] == close:
                    pos += 1
                    break
                raise ParseError(f"unexpected {text[pos]!r}", pos + 1)
        if ch == "{":
            return FSet(items), pos
        if len(items) != 2:
            raise ParseError("pairs have exactly two components", pos)
        return tuple(items), pos
    m = _INT.match(text, pos)
    if m:
        return int(m.group()), m.end()
    m = _ATOM.match(text, pos)
    if m:
        return m.group(), m.end()
    raise ParseError(f"unexpected {ch!r}", pos + 1)


def canonical(e: Element) -> bytes:
    return fmt(e).encode("utf-8")


def sort_elements(items: Iterable[Element], key: Callable | None = None) -> list:
    if key is None:
        return sorted(items, key=element_key)
    return sorted(items, key=lambda x: element_key(key(x)))
