"""Value universe shared by histories, states and commands.

Plain ints carry data, three singleton markers cover the special cases:
``EMPTY`` (an empty-stack answer), ``NULL`` (the null pointer) and
``UNDEF`` (the result of an expression that could not be evaluated).
"""

from __future__ import annotations

from typing import Any, NamedTuple


class Marker:
    """A named singleton value that compares by identity."""

    __slots__ = ("name", "rank")

    def __init__(self, name: str, rank: int) -> None:
        self.name = name
        self.rank = rank

    def __repr__(self) -> str:
        return self.name

    def __reduce__(self):
        return (_marker_by_name, (self.name,))


EMPTY = Marker("Empty", 0)
NULL = Marker("null", 1)
UNDEF = Marker("undef", 2)

MARKERS = {m.name: m for m in (EMPTY, NULL, UNDEF)}


def _marker_by_name(name: str) -> Marker:
    return MARKERS[name]


class PtrCtr(NamedTuple):
    """A pointer paired with a modification counter."""

    ptr: Any
    ctr: int


def same(a: Any, b: Any) -> bool:
    """Equality that refuses to identify ``True`` with ``1``."""
    if type(a) is not type(b):
        return False
    if isinstance(a, tuple):
        return len(a) == len(b) and all(same(x, y) for x, y in zip(a, b))
    return a == b


def value_key(v: Any) -> tuple:
    """Total sort key across every kind of value used in the toolkit."""
    if isinstance(v, Marker):
        return (0, v.rank)
    if isinstance(v, bool):
        return (1, int(v))
    if isinstance(v, int):
        return (2, v)
    if isinstance(v, str):
        return (3, v)
    if isinstance(v, PtrCtr):
        return (4, value_key(v.ptr), v.ctr)
    if isinstance(v, frozenset):
        return (5, tuple(sorted(value_key(x) for x in v)))
    if isinstance(v, tuple):
        return (6, tuple(value_key(x) for x in v))
    return (7, repr(v))


def show(v: Any) -> str:
    """Compact human-readable rendering."""
    if isinstance(v, PtrCtr):
        return f"({show(v.ptr)},{v.ctr})"
    if isinstance(v, frozenset):
        return "{" + ",".join(show(x) for x in sorted(v, key=value_key)) + "}"
    if isinstance(v, tuple):
        return "<" + ",".join(show(x) for x in v) + ">"
    return repr(v) if isinstance(v, Marker) else str(v)
