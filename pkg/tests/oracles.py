"""Brute-force reference implementations used to cross-check the library.

Nothing here reuses the search code under test: histories are built by
direct enumeration and sequential candidates by plain permutation.
"""

from __future__ import annotations

import itertools
from typing import Iterator, Sequence

from lincheck.histories import Event, History, Kind, SequentialOracle
from lincheck.values import EMPTY


def _op_events(proc: str, op: str, arg, out, done: bool) -> list:
    evs = [Event(op, proc, Kind.INVOKE, () if arg is None else (arg,))]
    if done:
        evs.append(Event(op, proc, Kind.RESPONSE, () if out is None else (out,)))
    return evs


def _op_shapes(valdom: Sequence) -> list:
    """(op, arg, out) for every complete operation over ``valdom``."""
    shapes = [("push", v, None) for v in valdom]
    shapes += [("pop", None, v) for v in list(valdom) + [EMPTY]]
    return shapes


def process_sequences(proc: str, max_ops: int, valdom: Sequence) -> list:
    """Every per-process event sequence with at most ``max_ops`` operations; only the last may pend."""
    shapes = _op_shapes(valdom)
    pend = [("push", v) for v in valdom] + [("pop", None)]
    out = [[]]
    for k in range(1, max_ops + 1):
        for done_ops in itertools.product(shapes, repeat=k - 1):
            prefix = []
            for op, arg, res in done_ops:
                prefix += _op_events(proc, op, arg, res, True)
            for op, arg, res in shapes:
                out.append(prefix + _op_events(proc, op, arg, res, True))
            for op, arg in pend:
                out.append(prefix + _op_events(proc, op, arg, None, False))
    return out


def interleavings(a: list, b: list) -> Iterator[list]:
    n, m = len(a), len(b)
    for pos in itertools.combinations(range(n + m), n):
        pos_set = set(pos)
        ia = ib = 0
        merged = []
        for k in range(n + m):
            if k in pos_set:
                merged.append(a[ia])
                ia += 1
            else:
                merged.append(b[ib])
                ib += 1
        yield merged


def all_histories(procs: Sequence[str], max_ops: int, valdom: Sequence) -> Iterator[History]:
    """Every legal two-process history with at most ``max_ops`` operations per process."""
    p, q = procs
    for sp in process_sequences(p, max_ops, valdom):
        for sq in process_sequences(q, max_ops, valdom):
            for merged in interleavings(sp, sq):
                yield History(merged)


def brute_stack_accepts(hs: Sequence[Event]) -> bool:
    """Replay a sequential history on a Python list used as a stack."""
    stack: list = []
    if len(hs) % 2:
        return False
    for e, r in zip(hs[0::2], hs[1::2]):
        if e.kind is not Kind.INVOKE or r.kind is not Kind.RESPONSE or (e.op_id, e.proc) != (r.op_id, r.proc):
            return False
        if e.op_id == "push":
            stack.append(e.values[0])
            if r.values != ():
                return False
        else:
            got = stack.pop() if stack else EMPTY
            if r.values != (got,):
                return False
    return True


def completions(h: History, valdom: Sequence) -> Iterator[History]:
    """Drop or complete each pending invocation, responses appended at the end."""
    last_inv = {}
    for i, e in enumerate(h):
        if e.kind is Kind.INVOKE:
            last_inv[e.proc] = i
        else:
            last_inv.pop(e.proc, None)
    pend = sorted(last_inv.values())
    choices = []
    for i in pend:
        e = h[i]
        outs = [None, ()] if e.op_id == "push" else [None] + [(v,) for v in list(valdom) + [EMPTY]]
        choices.append(outs)
    for pick in itertools.product(*choices):
        drop = {i for i, o in zip(pend, pick) if o is None}
        evs = [e for k, e in enumerate(h) if k not in drop]
        for i, o in zip(pend, pick):
            if o is not None:
                evs.append(Event(h[i].op_id, h[i].proc, Kind.RESPONSE, o))
        yield History(evs)


def operations(h: History) -> list:
    """Matched (invoke, response) pairs of a history without pending invocations."""
    open_ = {}
    ops = []
    for i, e in enumerate(h):
        if e.kind is Kind.INVOKE:
            open_[e.proc] = i
        else:
            ops.append((open_.pop(e.proc), i))
    return ops


def brute_hw(h: History, valdom: Sequence) -> bool:
    """Herlihy-Wing by permutation: some completion has a legal, order-respecting stack order."""
    for hc in completions(h, valdom):
        ops = operations(hc)
        for perm in itertools.permutations(ops):
            ok = True
            for x in range(len(perm)):
                for y in range(x + 1, len(perm)):
                    if perm[y][1] < perm[x][0]:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
            seq = [ev for i, j in perm for ev in (hc[i], hc[j])]
            if brute_stack_accepts(seq):
                return True
    return False


def sequential_candidates(h: History, valdom: Sequence) -> Iterator[History]:
    """Stack-valid sequential histories built from the operations of any completion of ``h``."""
    seen = set()
    for hc in completions(h, valdom):
        ops = operations(hc)
        for perm in itertools.permutations(ops):
            seq = tuple(ev for i, j in perm for ev in (hc[i], hc[j]))
            if seq not in seen and brute_stack_accepts(seq):
                seen.add(seq)
                yield History(seq)


def list_stack_oracle() -> SequentialOracle:
    """A second stack oracle over tuples with the top at the end."""
    def step(state, op, args):
        if op == "push":
            return [(state + (args[0],), ())]
        if not state:
            return [(state, (EMPTY,))]
        return [(state[:-1], (state[-1],))]
    return SequentialOracle((), step)


# -- interval predicates by direct quantification ---------------------------

def _span(d):
    return None if d.is_empty else (d.lo, d.hi)


def _sub(lo_hi):
    """Every subinterval of ``lo_hi`` (``None`` is the empty interval), empty first."""
    yield None
    if lo_hi is None:
        return
    lo, hi = lo_hi
    for a in range(lo, hi + 1):
        for b in range(a, hi + 1):
            yield (a, b)


def naive_holds(g, d, s) -> bool:
    """Evaluate ``g`` on ``d`` by quantifying over intervals and times directly."""
    from lincheck import intervals as iv
    return _naive(g, _span(d), s, iv)


def _naive(g, d, s, iv) -> bool:
    at = s.at
    if isinstance(g, (iv.TruePred, iv.FinPred)):
        return True
    if isinstance(g, (iv.FalsePred, iv.InfPred)):
        return False
    if isinstance(g, iv.EmptyPred):
        return d is None
    if isinstance(g, iv.NonEmptyPred):
        return d is not None
    if isinstance(g, iv.And):
        return all(_naive(x, d, s, iv) for x in g.parts)
    if isinstance(g, iv.Or):
        return any(_naive(x, d, s, iv) for x in g.parts)
    if isinstance(g, iv.Not):
        return not _naive(g.g, d, s, iv)
    if isinstance(g, iv.Chop):
        if _naive(g.g1, None, s, iv) and _naive(g.g2, d, s, iv):
            return True
        if d is None:
            return False
        if _naive(g.g1, d, s, iv) and _naive(g.g2, None, s, iv):
            return True
        lo, hi = d
        return any(_naive(g.g1, (lo, m), s, iv) and _naive(g.g2, (m + 1, hi), s, iv) for m in range(lo, hi))
    if isinstance(g, iv.Box):
        return all(_naive(g.g, x, s, iv) for x in _sub(d))
    if isinstance(g, iv.Diamond):
        return any(_naive(g.g, x, s, iv) for x in _sub(d))
    if isinstance(g, iv.Prev):
        if d is None:
            return any(_naive(g.g, x, s, iv) for x in _sub((s.start, s.end)))
        lo = d[0]
        preds = [None] + [(k, lo - 1) for k in range(s.start, lo)]
        return any(_naive(g.g, x, s, iv) for x in preds)
    if isinstance(g, iv.Omega):
        # finitely many nonempty adjoining pieces, each satisfying g
        if d is None:
            return True
        lo, hi = d
        reach = {lo}
        for a in range(lo, hi + 1):
            if a in reach:
                for b in range(a, hi + 1):
                    if _naive(g.g, (a, b), s, iv):
                        reach.add(b + 1)
        return hi + 1 in reach
    if isinstance(g, iv.BoxDot):
        return d is None or all(g._fn(at(t)) for t in range(d[0], d[1] + 1))
    if isinstance(g, iv.DiamondDot):
        return d is not None and any(g._fn(at(t)) for t in range(d[0], d[1] + 1))
    if isinstance(g, iv.Ola):
        return d is not None and g._fn(at(d[0]))
    if isinstance(g, iv.Ora):
        return d is not None and g._fn(at(d[1]))
    if isinstance(g, iv.Ceil):
        return d is not None and d[0] == d[1] and g._fn(at(d[0]))
    if isinstance(g, iv.StableSet):
        if d is None:
            return True
        # the first time of the window has no predecessor and counts as stable
        return all(t == s.start or all(at(t)[va] == at(t - 1)[va] for va in g.locs)
                   for t in range(d[0], d[1] + 1))
    raise TypeError(f"no naive clause for {type(g).__name__}")
