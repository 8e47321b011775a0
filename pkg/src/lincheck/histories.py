"""Concurrent histories and two independent linearisability checks.

A history is a sequence of invoke/response events.  Linearisability is
decided twice over:

* ``linearisable_hw`` extends the history with responses, completes it,
  and searches sequential orders that respect real-time precedence and
  replay through a sequential oracle;
* ``linearisable_linrel`` searches extensions together with an index map
  ``f`` into a *given* sequential history and checks the lin-relation.

The two routes share nothing beyond the matching-pair primitive so they
can be cross-checked against each other.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, Optional, Sequence

from .values import EMPTY, MARKERS, Marker, value_key


class HistoryError(ValueError):
    """Raised for malformed histories or out-of-range indices."""


class Kind(str, Enum):
    INVOKE = "invoke"
    RESPONSE = "response"


@dataclass(frozen=True)
class Event:
    op_id: str
    proc: str
    kind: Kind
    values: tuple = ()

    def __post_init__(self) -> None:
        if not isinstance(self.kind, Kind):
            try:
                object.__setattr__(self, "kind", Kind(self.kind))
            except ValueError as exc:
                raise HistoryError(f"unknown event kind {self.kind!r}") from exc
        object.__setattr__(self, "values", tuple(self.values))

    @property
    def is_invoke(self) -> bool:
        return self.kind is Kind.INVOKE

    def __repr__(self) -> str:
        tag = "I" if self.is_invoke else "R"
        args = "(" + ",".join(map(repr, self.values)) + ")" if self.values else ""
        return f"{self.op_id}_{self.proc}^{tag}{args}"


def inv(op: str, proc: str, *values: Any) -> Event:
    """Shorthand for an invocation event."""
    return Event(op, proc, Kind.INVOKE, values)


def res(op: str, proc: str, *values: Any) -> Event:
    """Shorthand for a response event."""
    return Event(op, proc, Kind.RESPONSE, values)


@dataclass(frozen=True)
class History:
    events: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))

    def __len__(self) -> int:
        return len(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __add__(self, other: "History | Sequence[Event]") -> "History":
        return History(self.events + tuple(other))

    def __repr__(self) -> str:
        return "<" + ", ".join(map(repr, self.events)) + ">"


MatchFn = Mapping[int, int]


@dataclass(frozen=True)
class SequentialOracle:
    """Sequential object: ``step(state, op, args)`` yields ``(state', outputs)`` pairs."""

    initial: Hashable
    step: Callable[[Hashable, str, tuple], Iterable[tuple]]

    def replay_states(self, hs: Sequence[Event]) -> set:
        """States reachable by replaying the complete operations of ``hs``."""
        states = {self.initial}
        k = 0
        n = len(hs)
        while k < n and states:
            e = hs[k]
            if k + 1 >= n:
                break
            r = hs[k + 1]
            nxt = set()
            for st in states:
                for st2, out in self.step(st, e.op_id, e.values):
                    if tuple(out) == r.values:
                        nxt.add(st2)
            states = nxt
            k += 2
        return states

    def accepts(self, hs: Sequence[Event]) -> bool:
        """True iff ``hs`` is sequential and replays through the oracle."""
        return is_sequential(History(hs)) and bool(self.replay_states(hs))


def _check_index(h: History, *idx: int) -> None:
    for i in idx:
        if not 0 <= i < len(h):
            raise HistoryError(f"index {i} outside history of length {len(h)}")


def _match_of(h: History, i: int) -> Optional[int]:
    """The unique response index matching invoke ``i``, or ``None``."""
    e = h[i]
    if not e.is_invoke:
        return None
    for j in range(i + 1, len(h)):
        f = h[j]
        if f.proc == e.proc:
            if not f.is_invoke and f.op_id == e.op_id:
                return j
            return None
    return None


def matching_pairs(h: History) -> list[tuple[int, int]]:
    """All matching pairs ``(i, j)`` ordered by ``i``."""
    out = []
    for i in range(len(h)):
        j = _match_of(h, i)
        if j is not None:
            out.append((i, j))
    return out


def matching_pair(h: History, i: int, j: int) -> bool:
    _check_index(h, i, j)
    if not i < j:
        return False
    a, b = h[i], h[j]
    if not (a.is_invoke and not b.is_invoke and a.op_id == b.op_id and a.proc == b.proc):
        return False
    return all(h[k].proc != a.proc for k in range(i + 1, j))


def pending(h: History, i: int) -> bool:
    _check_index(h, i)
    return h[i].is_invoke and _match_of(h, i) is None


def legal(h: History) -> bool:
    matched_resp = {j for _, j in matching_pairs(h)}
    return all(e.is_invoke or j in matched_resp for j, e in enumerate(h))


def complete(h: History) -> History:
    keep = set()
    for i, j in matching_pairs(h):
        keep.update((i, j))
    return History(e for k, e in enumerate(h) if k in keep)


def project(h: History, p: str) -> History:
    return History(e for e in h if e.proc == p)


def processes(h: History) -> list[str]:
    return sorted({e.proc for e in h})


def equivalent(h1: History, h2: History) -> bool:
    procs = {e.proc for e in h1} | {e.proc for e in h2}
    return all(project(h1, p) == project(h2, p) for p in procs)


def precedes(h: History) -> set[tuple[int, int]]:
    """Real-time order on matched operations, keyed by invoke index."""
    if not legal(h):
        raise HistoryError("precedence is only defined on legal histories")
    pairs = matching_pairs(h)
    return {(i1, i2) for i1, j1 in pairs for i2, _ in pairs if j1 < i2}


def is_sequential(h: History) -> bool:
    if len(h) == 0:
        return True
    if not h[0].is_invoke:
        return False
    last = len(h) - 1
    return all(
        not e.is_invoke or i == last or matching_pair(h, i, i + 1)
        for i, e in enumerate(h)
    )


def linrel(hc: History, f: MatchFn, hs: History) -> bool:
    n_c, n_s = len(hc), len(hs)
    if any(not (0 <= i < n_c) or not (0 <= v < n_s) for i, v in f.items()):
        return False
    if set(f.values()) != set(range(n_s)):
        return False
    pairs = matching_pairs(hc)
    for i, j in pairs:
        if i not in f or j not in f:
            return False
    if any(hc[i] != hs[v] for i, v in f.items()):
        return False
    if any(f[j] != f[i] + 1 for i, j in pairs):
        return False
    for _, j in pairs:
        for k, _l in pairs:
            if j < k and not f[j] < f[k]:
                return False
    return True


def _response_values(valdom: Iterable[Any]) -> list[tuple]:
    vals = sorted(set(valdom) | {EMPTY}, key=value_key)
    return [()] + [(v,) for v in vals]


def extensions(hc: History, valdom: Iterable[Any]) -> Iterator[History]:
    """Extensions of ``hc`` by responses to pending invocations.

    Only invocations that are the last event of their process can be
    answered.  Extensions are yielded shortest first, then in the order
    of the candidate response values, which keeps witnesses deterministic.
    """
    open_invokes = [
        i for i in range(len(hc))
        if pending(hc, i) and all(hc[k].proc != hc[i].proc for k in range(i + 1, len(hc)))
    ]
    outs = _response_values(valdom)
    for size in range(len(open_invokes) + 1):
        for chosen in itertools.combinations(open_invokes, size):
            for vals in itertools.product(outs, repeat=size):
                extra = [res(hc[i].op_id, hc[i].proc, *v) for i, v in zip(chosen, vals)]
                yield hc + extra


def _linrel_maps(he: History, hs: History) -> Iterator[dict[int, int]]:
    """Every ``f`` with ``linrel(he, f, hs)``, found by backtracking."""
    pairs = matching_pairs(he)
    matched = {i for p in pairs for i in p}
    pend = [i for i in range(len(he)) if he[i].is_invoke and i not in matched]
    n_s = len(hs)
    slots = []
    for i, j in pairs:
        cands = [a for a in range(n_s - 1) if hs[a] == he[i] and hs[a + 1] == he[j]]
        slots.append(((i, j), cands))
    for i in pend:
        slots.append(((i,), [None] + [a for a in range(n_s) if hs[a] == he[i]]))

    f: dict[int, int] = {}

    def rec(k: int) -> Iterator[dict[int, int]]:
        if k == len(slots):
            if linrel(he, f, hs):
                yield dict(f)
            return
        key, cands = slots[k]
        for a in cands:
            if a is None:
                yield from rec(k + 1)
                continue
            for off, idx in enumerate(key):
                f[idx] = a + off
            yield from rec(k + 1)
            for idx in key:
                del f[idx]

    yield from rec(0)


def linrel_witnesses(hc: History, hs: History, valdom: Iterable[Any]) -> Iterator[tuple[History, dict[int, int]]]:
    valdom = list(valdom)
    for he in extensions(hc, valdom):
        if not legal(he):
            continue
        for f in _linrel_maps(he, hs):
            yield he, f


def linearisable_linrel(hc: History, hs: History, valdom: Iterable[Any]) -> Optional[tuple[History, dict[int, int]]]:
    if not legal(hc):
        raise HistoryError("linearisability is only defined on legal histories")
    return next(linrel_witnesses(hc, hs, valdom), None)


def _sequential_orders(hcc: History, oracle: SequentialOracle) -> Iterator[History]:
    """Oracle-valid sequential orders of the operations of a complete history."""
    pairs = matching_pairs(hcc)
    n = len(pairs)
    before = {k: set() for k in range(n)}
    for a, (_, ja) in enumerate(pairs):
        for b, (ib, _) in enumerate(pairs):
            if ja < ib:
                before[b].add(a)
    used = [False] * n
    order: list[int] = []

    def rec(states: set) -> Iterator[History]:
        if len(order) == n:
            evs = []
            for k in order:
                i, j = pairs[k]
                evs += [hcc[i], hcc[j]]
            yield History(evs)
            return
        for k in range(n):
            if used[k] or any(not used[b] for b in before[k]):
                continue
            i, j = pairs[k]
            e, r = hcc[i], hcc[j]
            nxt = set()
            for st in states:
                for st2, out in oracle.step(st, e.op_id, e.values):
                    if tuple(out) == r.values:
                        nxt.add(st2)
            if not nxt:
                continue
            used[k] = True
            order.append(k)
            yield from rec(nxt)
            order.pop()
            used[k] = False

    yield from rec({oracle.initial})


def hw_witnesses(hc: History, oracle: SequentialOracle, valdom: Iterable[Any]) -> Iterator[History]:
    """All sequential witnesses, deduplicated, in search order."""
    valdom = list(valdom)
    seen = set()
    for ext in extensions(hc, valdom):
        for hs in _sequential_orders(complete(ext), oracle):
            if hs not in seen:
                seen.add(hs)
                yield hs


def linearisable_hw(hc: History, oracle: SequentialOracle, valdom: Iterable[Any]) -> Optional[History]:
    if not legal(hc):
        raise HistoryError("linearisability is only defined on legal histories")
    return next(hw_witnesses(hc, oracle, valdom), None)


# -- JSON ---------------------------------------------------------------

def _value_from_json(v: Any) -> Any:
    if isinstance(v, str) and v in MARKERS:
        return MARKERS[v]
    if isinstance(v, int) and not isinstance(v, bool):
        return v
    raise HistoryError(f"unsupported value {v!r}")


def _value_to_json(v: Any) -> Any:
    # markers travel by name; "undef" marks a response computed from a bad dereference
    return v.name if isinstance(v, Marker) else v


def history_from_json(obj: Any) -> History:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or not isinstance(obj.get("events"), list):
        raise HistoryError("expected an object with an 'events' list")
    evs = []
    for raw in obj["events"]:
        try:
            kind = Kind(raw["kind"])
        except (KeyError, ValueError) as exc:
            raise HistoryError(f"bad event kind in {raw!r}") from exc
        evs.append(Event(str(raw["op"]), str(raw["proc"]), kind,
                         tuple(_value_from_json(v) for v in raw.get("values", []))))
    return History(evs)


def history_to_json(h: History) -> dict:
    return {"events": [
        {"op": e.op_id, "proc": e.proc, "kind": e.kind.value,
         "values": [_value_to_json(v) for v in e.values]}
        for e in h
    ]}


def load_history(path: str) -> History:
    with open(path, encoding="utf-8") as fh:
        return history_from_json(json.load(fh))


def dump_history(h: History, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(history_to_json(h), fh, indent=1)
