"""Small-scope stream generation and bounded refinement checks.

The generator runs each process of a command as a thread stepping
through the command's atoms (guards, assignments, idles).  At every
time step each thread either stays put or makes one visible move:

* ``read``   evaluate the atom's expressions in the current state;
* ``write``  store the value computed by an earlier read;
* ``record`` write the history variable at the end of a recording block;
* ``next``   leave the current atom and enter the following one.

Threads move simultaneously and every step moves at least one thread.
Permissions are granted per state: a writer holds the whole share, every
other location is shared for reading among the processes allowed to see
it (owners of context locals, the claimant of an exclusive block, or
everyone).  This makes both healthiness conditions hold by construction.
"""

from __future__ import annotations

import itertools
import multiprocessing
import os
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Iterable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from .commands import (
    AssignAddr, AssignVar, Chaos, Choice, Cmd, Context, EndRecord, Enf, Guard, Idle, Init, IntFree,
    Label, Local, OnlyAccessedBy, Omega, Par, Rely, Seq, StartRecord, WriteSomeLoc, _flatten, beh,
    locations_of, pc_var,
)
from .histories import History, HistoryError
from .intervals import (
    TRUE, And, BoxDot, Evaluator, Interval, IntvPred, Not, Stream, TruePred, _cond_fn, dump_trace,
)
from .memstate import ONE, ZERO, Expr, Loc, MemState, Universe, accessed, is_addr, value_of
from .values import NULL, same, value_key

DEFAULT_CAP = 10 ** 6
UNSET_PC = "⊥"


def state_cap() -> int:
    """The exhaustive-enumeration cap, overridable through ``LINCHECK_CAP``."""
    raw = os.environ.get("LINCHECK_CAP")
    return int(raw) if raw else DEFAULT_CAP


class CapError(RuntimeError):
    """Exhaustive enumeration visited more states than the cap allows."""

    def __init__(self, cap: int, what: str = "states") -> None:
        self.cap = cap
        super().__init__(f"enumeration exceeded the cap of {cap} {what}")


class GeneratorError(ValueError):
    """The command or configuration cannot be executed by the generator."""


@dataclass(frozen=True)
class Mode:
    """``exhaustive`` enumeration, or ``random`` walks from ``seed``."""

    kind: str = "exhaustive"
    seed: int = 0
    count: int = 1000

    def __post_init__(self) -> None:
        if self.kind not in ("exhaustive", "random"):
            raise ValueError(f"unknown mode {self.kind!r}")

    @classmethod
    def of(cls, mode: Union[str, "Mode"], seed: int = 0, count: int = 1000) -> "Mode":
        if isinstance(mode, Mode):
            return mode
        return cls(mode, seed, count)


# -- continuation items -------------------------------------------------

@dataclass(frozen=True)
class _EnfEnd:
    enf: Enf


@dataclass(frozen=True)
class _Iter:
    node: Omega
    count: int


@dataclass(frozen=True)
class _EnfInfo:
    oab: tuple
    intfree: tuple
    bans: tuple
    start_rec: tuple
    end_rec: tuple
    other: tuple


_INFO: dict = {}


def _analyse(enf: Enf) -> _EnfInfo:
    info = _INFO.get(enf)
    if info is not None:
        return info
    oab, intfree, bans, srec, erec, other = [], [], [], [], [], []
    for part in _flatten(enf.d):
        if isinstance(part, OnlyAccessedBy):
            oab.append(part.fn)
        elif isinstance(part, IntFree):
            intfree.append(part.fn)
        elif isinstance(part, Not) and isinstance(part.g, WriteSomeLoc):
            bans.append(part.g.fn)
        elif isinstance(part, StartRecord):
            srec.append((part.v, part.e))
        elif isinstance(part, EndRecord):
            erec.append((part.v, part.e))
        elif isinstance(part, TruePred):
            continue
        else:
            other.append(part)
    info = _INFO[enf] = _EnfInfo(tuple(oab), tuple(intfree), tuple(bans), tuple(srec), tuple(erec), tuple(other))
    return info


@dataclass(frozen=True)
class _Block:
    enf: Enf
    start: int
    recorded: bool = False


@dataclass(frozen=True)
class _Thread:
    proc: str
    phase: str
    atom: Any = None
    cont: tuple = ()
    blocks: tuple = ()
    target: Any = None
    value: Any = None
    hold: Optional[tuple] = None
    forced: bool = False


@dataclass(frozen=True)
class _Move:
    kind: str
    thread: _Thread
    writes: tuple = ()
    read: Any = None
    exited: tuple = ()


_ATOMS = (Guard, AssignVar, AssignAddr)


# -- the generator ------------------------------------------------------

class Generator:
    """Steps the threads of one command; shared by exhaustive and random modes."""

    def __init__(self, C: Cmd, P: Iterable[str], Z: Iterable[Loc], horizon: int,
                 valdom: Iterable[Any], extra_locations: Iterable[Loc] = ()) -> None:
        if horizon < 2:
            raise GeneratorError("horizon must be at least 2 (a pre-state and one step)")
        self.C = C
        self.P = tuple(sorted(P))
        self.Z = frozenset(Z)
        self.horizon = horizon
        self.valdom = tuple(sorted(set(valdom), key=value_key))
        self._norm_cache: dict = {}
        self._row_cache: dict = {}
        self.last_attempts = 0
        self.all_procs = frozenset(self.P)
        self.init_cond, self.init_store, self.branches, top_ctx = self._peel(C)
        self.holders = self._holders(top_ctx)
        self.universe = self._universe(extra_locations)
        self.local_of = {loc: hs for loc, hs in self.holders.items()
                         if loc in self.universe.loc_index and hs != self.all_procs}

    # setup

    def _peel(self, C: Cmd):
        cond, store, ctx = None, None, []
        node = C
        while True:
            if isinstance(node, Context):
                ctx.append(node.Y)
                node = node.c
            elif isinstance(node, Init):
                cond, store = node.c, node.store
                node = node.body
            else:
                break
        if isinstance(node, Par):
            missing = set(node.procs) ^ set(self.P)
            if missing:
                raise GeneratorError(f"parallel branches {node.procs} do not match processes {self.P}")
            branches = {p: c for p, c in node.branches}
        elif len(self.P) == 1:
            branches = {self.P[0]: node}
        else:
            raise GeneratorError("a command run by several processes must be a parallel composition")
        return cond, store, branches, ctx

    def _holders(self, top_ctx: list) -> dict:
        holders: dict = {}
        everyone = frozenset(self.P)
        for Y in top_ctx:
            for va in Y:
                holders[va] = everyone

        def walk(c: Cmd, p: str) -> None:
            if isinstance(c, Context):
                for va in c.Y:
                    holders[va] = frozenset({p})
                walk(c.c, p)
            elif isinstance(c, Seq):
                walk(c.c1, p)
                walk(c.c2, p)
            elif isinstance(c, Choice):
                for b in c.branches:
                    walk(b, p)
            elif isinstance(c, (Omega, Label, Enf, Rely)):
                walk(c.c, p)
            elif isinstance(c, Init):
                walk(c.body, p)
            elif isinstance(c, Par):
                raise GeneratorError("nested parallel composition is not supported by the generator")

        for p, c in self.branches.items():
            holders[pc_var(p)] = frozenset({p})
            walk(c, p)
        return holders

    def _universe(self, extra: Iterable[Loc]) -> Universe:
        locs = set(locations_of(self.C)) | set(self.Z) | set(extra)
        locs |= {pc_var(p) for p in self.P if _has_label(self.branches[p])}
        if self.init_store:
            locs |= set(self.init_store)
        names = sorted(l for l in locs if isinstance(l, str))
        addrs = sorted(l for l in locs if isinstance(l, int))
        return Universe(tuple(names) + tuple(addrs), self.P)

    def initial_states(self, limit: int = 4096) -> list:
        """Initial states: the declared store, or every valuation over the value domain satisfying Init."""
        U = self.universe
        base = {loc: UNSET_PC for loc in U.locations if isinstance(loc, str) and loc.startswith("pc_")}
        cond = _cond_fn(self.init_cond) if self.init_cond is not None else None
        if self.init_store is not None:
            store = dict(base)
            store.update(self.init_store)
            sigma = self._with_perms(U.locations, self._values(store), {}, {})
            if cond is not None and not cond(sigma):
                raise GeneratorError("the declared initial store violates the Init condition")
            return [sigma]
        free = [loc for loc in U.locations if isinstance(loc, str) and loc not in base]
        out = []
        for combo in itertools.product(self.valdom, repeat=len(free)):
            store = dict(base)
            store.update(zip(free, combo))
            sigma = self._with_perms(U.locations, self._values(store), {}, {})
            if cond is None or cond(sigma):
                out.append(sigma)
                if len(out) > limit:
                    raise CapError(limit, "initial states")
        if not out:
            raise GeneratorError("no initial state satisfies the Init condition")
        return out

    def _values(self, store: Mapping[Loc, Any]) -> tuple:
        return tuple(store.get(loc, 0) for loc in self.universe.locations)

    def _with_perms(self, locs, values: tuple, writes: dict, oab_owner: dict) -> MemState:
        rows = []
        procs = self.universe.procs
        for loc in self.universe.locations:
            w = writes.get(loc)
            writer = w[0] if w is not None else None
            holders = self.holders.get(loc, self.all_procs)
            owner = oab_owner.get(loc)
            if owner is not None:
                holders = frozenset({owner})
            key = (writer, holders)
            row = self._row_cache.get(key)
            if row is None:
                if writer is not None:
                    row = tuple(ONE if q == writer else ZERO for q in procs)
                else:
                    share = Fraction(1, max(2, len(holders)))
                    row = tuple(share if q in holders else ZERO for q in procs)
                self._row_cache[key] = row
            rows.append(row)
        return MemState(self.universe, values, tuple(rows))

    def initial_threads(self) -> tuple:
        return tuple(_Thread(p, "begin", cont=(self.branches[p],)) for p in self.P)

    # normalisation

    def normalize(self, cont: tuple) -> list:
        """Every way to reach the next atom: ``(effects, atom or None, rest)``."""
        res = self._norm_cache.get(cont)
        if res is None:
            res = []
            self._norm(cont, (), frozenset(), res)
            self._norm_cache[cont] = res
        return res

    def _norm(self, stack: tuple, effects: tuple, seen: frozenset, out: list) -> None:
        if not stack:
            out.append((effects, None, ()))
            return
        top, rest = stack[-1], stack[:-1]
        if isinstance(top, _EnfEnd):
            self._norm(rest, effects + (("exit", top.enf),), seen, out)
        elif isinstance(top, _Iter):
            node, n = top.node, top.count
            if node in seen:
                return
            bound = node.bound if node.bound is not None else self.horizon
            if not node.exact or n >= bound:
                self._norm(rest, effects, seen, out)
            if n < bound:
                self._norm(rest + (_Iter(node, n + 1), node.c), effects, seen | {node}, out)
        elif isinstance(top, Omega):
            self._norm(rest + (_Iter(top, 0),), effects, seen, out)
        elif isinstance(top, Seq):
            self._norm(rest + (top.c2, top.c1), effects, seen, out)
        elif isinstance(top, Choice):
            for b in top.branches:
                self._norm(rest + (b,), effects, seen, out)
        elif isinstance(top, Label):
            self._norm(rest + (top.c,), effects + (("label", top.l),), seen, out)
        elif isinstance(top, Enf):
            self._norm(rest + (_EnfEnd(top), top.c), effects + (("enter", top),), seen, out)
        elif isinstance(top, Context):
            self._norm(rest + (top.c,), effects, seen, out)
        elif isinstance(top, Init):
            self._norm(rest + (top.body,), effects, seen, out)
        elif isinstance(top, (Idle, Chaos)):
            self._norm(rest, effects, seen, out)
            out.append((effects, top, rest))
        elif isinstance(top, _ATOMS):
            out.append((effects, top, rest))
        elif isinstance(top, Rely):
            raise GeneratorError("rely conditions are for checking only; the generator cannot run them")
        elif isinstance(top, Par):
            raise GeneratorError("nested parallel composition is not supported by the generator")
        else:
            raise GeneratorError(f"cannot execute {type(top).__name__}")

    # per-thread moves

    def moves(self, th: _Thread, sigma: MemState, t: int) -> list:
        ph = th.phase
        if ph == "done":
            return [_Move("stay", th)]
        if ph == "begin":
            return self._next_moves(th, sigma, t, early=True)
        out = []
        if not th.forced:
            out.append(_Move("stay", th, (th.hold,) if th.hold else ()))
        if ph == "pre":
            out.append(_Move("read", th, read=th.atom))
        elif ph == "mid":
            nt = replace(th, phase="hold", hold=(th.target, th.value), target=None, value=None)
            out.append(_Move("write", nt, ((th.target, th.value),)))
            # a block's last write may carry its end record in the same step,
            # unless the record reads the location being written
            rec = self._record_move(nt, sigma)
            if rec is not None and not self._record_reads(nt, th.target, sigma):
                out.append(replace(rec, kind="write"))
        else:
            rec = self._record_move(th, sigma)
            if rec is not None:
                out.append(rec)
            out.extend(self._next_moves(th, sigma, t, early=ph == "hold" or th.forced))
        return out

    def _pending_record(self, th: _Thread) -> Optional[int]:
        """Index of the recording block whose body has just completed, if any."""
        depth = len(th.blocks)
        for item in reversed(th.cont):
            if not isinstance(item, _EnfEnd):
                return None
            depth -= 1
            blk = th.blocks[depth]
            if _analyse(blk.enf).end_rec and not blk.recorded:
                return depth
        return None

    def _record_reads(self, th: _Thread, loc: Loc, sigma: MemState) -> bool:
        blk = th.blocks[self._pending_record(th)]
        return any(loc in accessed(e, sigma, strict=False) for _, e in _analyse(blk.enf).end_rec)

    def _record_move(self, th: _Thread, sigma: MemState) -> Optional[_Move]:
        if th.forced:
            return None
        i = self._pending_record(th)
        if i is None:
            return None
        blk = th.blocks[i]
        writes = [th.hold] if th.hold else []
        for v, e in _analyse(blk.enf).end_rec:
            writes.append((v, value_of(e, sigma)))
        blocks = th.blocks[:i] + (replace(blk, recorded=True),) + th.blocks[i + 1:]
        return _Move("record", replace(th, blocks=blocks, forced=True), tuple(writes))

    def _next_moves(self, th: _Thread, sigma: MemState, t: int, early: bool) -> list:
        out = []
        releasing = th.phase in ("hold", "begin") or th.forced
        for effects, atom, cont in self.normalize(th.cont):
            blocks = list(th.blocks)
            exited, writes, label, ok = [], [], None, True
            for kind, arg in effects:
                if kind == "exit":
                    blk = blocks.pop()
                    if _analyse(blk.enf).end_rec and not blk.recorded:
                        ok = False
                        break
                    exited.append((blk, t - 1))
                elif kind == "enter":
                    blocks.append(_Block(arg, t))
                    for v, e in _analyse(arg).start_rec:
                        writes.append((v, value_of(e, sigma)))
                else:
                    label = arg
            if not ok:
                continue
            if label is not None:
                pc = pc_var(th.proc)
                if not same(sigma[pc], label):
                    writes.append((pc, label))
            base = _Thread(th.proc, "pre", atom, cont, tuple(blocks))
            writes_t = tuple(writes)
            if atom is None:
                if releasing:
                    out.append(_Move("next", replace(base, phase="done"), writes_t, exited=tuple(exited)))
            elif isinstance(atom, (Idle, Chaos)):
                out.append(_Move("next", replace(base, phase="idle"), writes_t, exited=tuple(exited)))
            else:
                if early:
                    out.append(_Move("next", base, writes_t, exited=tuple(exited)))
                out.append(_Move("next", base, writes_t, read=atom, exited=tuple(exited)))
        return out

    def can_finish(self, th: _Thread) -> bool:
        if th.phase == "done":
            return True
        if th.phase not in ("tail", "idle", "hold"):
            return False
        blocks = list(th.blocks)
        for effects, atom, _ in self.normalize(th.cont):
            if atom is not None:
                continue
            bl = list(blocks)
            ok = True
            for kind, _arg in effects:
                if kind == "exit":
                    blk = bl.pop()
                    if _analyse(blk.enf).end_rec and not blk.recorded:
                        ok = False
                        break
                else:
                    ok = False
                    break
            if ok:
                return True
        return False

    # one synchronous step

    def step(self, sigma: MemState, combo: Sequence[_Move]) -> Optional[tuple]:
        U = self.universe
        idx = U.loc_index
        writes: dict = {}
        for m in combo:
            p = m.thread.proc
            for loc, v in m.writes:
                if loc in writes or loc not in idx:
                    return None
                writes[loc] = (p, v)
        vals = list(sigma.values)
        for loc, (_, v) in writes.items():
            vals[idx[loc]] = v
        values = tuple(vals)
        probe = MemState(U, values, sigma.perms)
        oab_owner: dict = {}
        intfree: list = []
        for m in combo:
            p = m.thread.proc
            for blk in m.thread.blocks:
                info = _analyse(blk.enf)
                for fn in info.oab:
                    for loc in fn(probe):
                        if loc not in idx:
                            continue
                        if oab_owner.get(loc, p) != p:
                            return None
                        oab_owner[loc] = p
                for fn in info.intfree:
                    intfree.append((p, fn(probe)))
                for fn in info.bans:
                    for loc in fn(probe):
                        w = writes.get(loc)
                        if w is not None and w[0] == p:
                            return None
        for loc, (w, _) in writes.items():
            owner = oab_owner.get(loc)
            if owner is not None and owner != w:
                return None
            hs = self.local_of.get(loc)
            if hs is not None and w not in hs:
                return None
        for p, locs in intfree:
            for loc in locs:
                w = writes.get(loc)
                if w is not None and w[0] != p:
                    return None
        threads = []
        for m in combo:
            th = m.thread
            if m.read is not None:
                th = self._resolve_read(th, m.read, probe, writes, oab_owner)
                if th is None:
                    return None
            threads.append(th)
        new_sigma = self._with_perms(U.locations, values, writes, oab_owner)
        return new_sigma, tuple(threads)

    def _resolve_read(self, th: _Thread, atom: Cmd, probe: MemState, writes: dict, oab_owner: dict):
        p = th.proc
        if isinstance(atom, Guard):
            exprs = (atom.c,)
        elif isinstance(atom, AssignVar):
            exprs = (atom.e,)
        else:
            exprs = (atom.ae, atom.e)
        idx = self.universe.loc_index
        for e in exprs:
            for loc in accessed(e, probe, strict=False):
                if loc not in idx:
                    continue
                if loc in writes:
                    return None
                owner = oab_owner.get(loc)
                if owner is not None and owner != p:
                    return None
                hs = self.local_of.get(loc)
                if hs is not None and p not in hs:
                    return None
        if isinstance(atom, Guard):
            if value_of(atom.c, probe) is not True:
                return None
            return replace(th, phase="tail")
        if isinstance(atom, AssignVar):
            if atom.v not in idx:
                return None
            return replace(th, phase="mid", target=atom.v, value=value_of(atom.e, probe))
        a = value_of(atom.ae, probe)
        if not is_addr(a) or a not in idx:
            return None
        return replace(th, phase="mid", target=a, value=value_of(atom.e, probe))

    # post-hoc enforced conditions

    def _checks(self, moves: Sequence[_Move]) -> list:
        out = []
        for m in moves:
            for blk, end in m.exited:
                for g in _analyse(blk.enf).other:
                    if end >= blk.start:
                        out.append((g, Interval(blk.start, end)))
                    else:
                        out.append((g, Interval()))
        return out

    def _final_checks(self, threads: Sequence[_Thread], T: int) -> list:
        out = []
        for th in threads:
            for blk in th.blocks:
                for g in _analyse(blk.enf).other:
                    out.append((g, Interval(blk.start, T) if T >= blk.start else Interval()))
        return out

    def _accept(self, states: list, threads: Sequence[_Thread], checks: list) -> Optional[Stream]:
        s = Stream(0, tuple(states))
        pending = checks + self._final_checks(threads, s.end)
        if pending:
            ev = Evaluator(s)
            if not all(ev.holds(g, d) for g, d in pending):
                return None
        return s

    # drivers

    def exhaustive(self, cap: Optional[int] = None) -> list:
        cap = state_cap() if cap is None else cap
        seen: dict = {}
        counter = [0]
        T = self.horizon - 1

        def dfs(states: list, threads: tuple, checks: list) -> None:
            counter[0] += 1
            if counter[0] > cap:
                raise CapError(cap)
            t = len(states)
            if t > 1 and all(self.can_finish(th) for th in threads):
                s = self._accept(states, threads, checks)
                if s is not None:
                    seen.setdefault(_stream_key(s), s)
                return
            if t > T:
                return
            sigma = states[-1]
            options = [self.moves(th, sigma, t) for th in threads]
            for combo in itertools.product(*options):
                if all(m.kind == "stay" for m in combo):
                    continue
                res = self.step(sigma, combo)
                if res is None:
                    continue
                new_sigma, new_threads = res
                dfs(states + [new_sigma], new_threads, checks + self._checks(combo))

        for sigma0 in self.initial_states():
            dfs([sigma0], self.initial_threads(), [])
        return list(seen.values())

    def random_walks(self, seed: int, count: int, max_attempts: Optional[int] = None,
                     stay_weight: float = 0.3) -> list:
        """Seeded random schedules from ``count`` successful walks, deduplicated.

        Each step picks a random valid combination of moves.  Combinations
        are ranked by a random key scaled by ``stay_weight`` once for every
        thread that stutters or enters its next atom without reading, so
        walks favour progress.  A walk that overruns the horizon or gets
        stuck is discarded; at most ``max_attempts`` walks are tried.
        """
        rng = random.Random(seed)
        inits = self.initial_states()
        seen: dict = {}
        successes = 0
        attempts = 0
        max_attempts = max_attempts if max_attempts is not None else 50 * count
        T = self.horizon - 1
        while successes < count and attempts < max_attempts:
            attempts += 1
            states = [rng.choice(inits)]
            threads = self.initial_threads()
            checks: list = []
            while True:
                t = len(states)
                if t > 1 and all(self.can_finish(th) for th in threads):
                    s = self._accept(states, threads, checks)
                    if s is not None:
                        successes += 1
                        seen.setdefault(_stream_key(s), s)
                    break
                if t > T:
                    break
                sigma = states[-1]
                options = [self.moves(th, sigma, t) for th in threads]
                keyed = []
                for c in itertools.product(*options):
                    stays = sum(m.kind == "stay" for m in c)
                    if stays == len(c):
                        continue
                    lazy = stays + sum(m.kind == "next" and m.read is None and m.thread.phase == "pre"
                                       for m in c)
                    keyed.append((rng.random() * stay_weight ** lazy, c))
                keyed.sort(key=lambda kc: -kc[0])
                res = None
                for _, c in keyed:
                    res = self.step(sigma, c)
                    if res is not None:
                        checks = checks + self._checks(c)
                        break
                if res is None:
                    break
                states.append(res[0])
                threads = res[1]
        self.last_attempts = attempts
        return list(seen.values())


def _has_label(c: Cmd) -> bool:
    if isinstance(c, Label):
        return True
    for attr in ("c", "c1", "c2", "body"):
        sub = getattr(c, attr, None)
        if isinstance(sub, Cmd) and _has_label(sub):
            return True
    if isinstance(c, Choice):
        return any(_has_label(b) for b in c.branches)
    return False


def _stream_key(s: Stream) -> tuple:
    return tuple((sigma.values, sigma.perms) for sigma in s.states)


def execution_interval(s: Stream) -> Interval:
    """The interval a generated stream's command runs over: every time after the initial state."""
    return Interval(s.start + 1, s.end)


def enumerate_streams(C: Cmd, P: Iterable[str], Z: Iterable[Loc], horizon: int, valdom: Iterable[Any],
                      mode: Union[str, Mode] = "exhaustive", *, seed: int = 0, count: int = 1000,
                      cap: Optional[int] = None, extra_locations: Iterable[Loc] = ()) -> list:
    """Streams of ``C`` run by ``P`` in context ``Z`` with at most ``horizon`` states.

    Exhaustive mode raises :class:`CapError` once more than ``cap`` search
    states are visited; random mode performs ``count`` successful seeded
    walks and returns the distinct streams in the order found.
    """
    mode = Mode.of(mode, seed, count)
    gen = Generator(C, P, Z, horizon, valdom, extra_locations)
    if mode.kind == "exhaustive":
        return gen.exhaustive(cap)
    return gen.random_walks(mode.seed, mode.count)


def satisfies(C: Cmd, P: Iterable[str], Z: Iterable[Loc], s: Stream, d: Interval) -> bool:
    return Evaluator(s).holds(beh(P, Z, C), d)


# -- verdicts -----------------------------------------------------------

HOLDS = "holds-on-all"
COUNTEREXAMPLE = "counterexample"


@dataclass
class Verdict:
    outcome: str
    witness: Optional[tuple] = None
    checked: int = 0
    note: str = ""
    parts: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.outcome == HOLDS

    def to_json(self) -> dict:
        trace, interval = None, None
        if self.witness is not None:
            s, d = self.witness
            trace = dump_trace(s).splitlines()
            interval = None if d.is_empty else [d.lo, d.hi]
        out = {"outcome": self.outcome, "witness_trace": trace, "witness_interval": interval}
        if self.note:
            out["note"] = self.note
        if self.parts:
            out["parts"] = {k: v.to_json() for k, v in self.parts.items()}
        return out


def _first_pair(rows: np.ndarray) -> Optional[tuple]:
    for i, r in enumerate(rows.tolist()):
        if r:
            j = (r & -r).bit_length() - 1
            return i, j
    return None


_JOB: dict = {}


def _run_job(i: int):
    return _JOB["fn"](i)


def parallel_map(fn: Callable[[int], Any], n: int, workers: int = 1) -> list:
    """``[fn(0), ..., fn(n-1)]``, forked over ``workers`` processes when useful."""
    if workers <= 1 or n < 2 or "fork" not in multiprocessing.get_all_start_methods():
        return [fn(i) for i in range(n)]
    _JOB["fn"] = fn
    try:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(workers) as pool:
            return pool.map(_run_job, range(n), chunksize=max(1, n // (workers * 8)))
    finally:
        _JOB.clear()


def _refines_on(s: Stream, gA: IntvPred, gC: IntvPred, intervals: str) -> Optional[Interval]:
    ev = Evaluator(s)
    if intervals == "execution":
        d = execution_interval(s)
        if ev.holds(gC, d) and not ev.holds(gA, d):
            return d
        return None
    tC, tA = ev.table(gC), ev.table(gA)
    if tC.e and not tA.e:
        return Interval()
    hit = _first_pair(tC.rows & ~tA.rows)
    if hit is None:
        return None
    return Interval(s.start + hit[0], s.start + hit[1])


def check_behaviour_refinement(A: Cmd, C: Cmd, P: Iterable[str], Y: Iterable[Loc], Z: Iterable[Loc],
                               horizon: int, valdom: Iterable[Any] = (1, 2),
                               mode: Union[str, Mode] = "exhaustive", *, seed: int = 0, count: int = 1000,
                               cap: Optional[int] = None, streams: Optional[Sequence[Stream]] = None,
                               intervals: str = "all", workers: int = 1) -> Verdict:
    """Bounded check of ``beh_{P,Z}.C ⊨ beh_{P,Y}.A`` over the streams of ``C``.

    Every subinterval of every stream is compared (``intervals="all"``),
    or only the execution interval.
    """
    P = tuple(sorted(P))
    if streams is None:
        streams = enumerate_streams(C, P, Z, horizon, valdom, mode, seed=seed, count=count, cap=cap,
                                    extra_locations=locations_of(A) | set(Y))
    gA, gC = beh(P, Y, A), beh(P, Z, C)
    results = parallel_map(lambda i: _refines_on(streams[i], gA, gC, intervals), len(streams), workers)
    for s, d in zip(streams, results):
        if d is not None:
            return Verdict(COUNTEREXAMPLE, (s, d), len(streams))
    return Verdict(HOLDS, None, len(streams))


# -- link and data refinement ------------------------------------------

SimFn = Callable[[Optional[MemState], MemState], bool]


def _empty_abstract(sigma: MemState) -> list:
    return [None]


def link_ok_times(s: Stream, c: SimFn, candidates: Callable[[MemState], Iterable[Any]],
                  cap: Optional[int] = None) -> list:
    """For each time, whether some abstract state pairs with the concrete one under ``c``."""
    cap = state_cap() if cap is None else cap
    ok = []
    for sigma in s.states:
        found = False
        for n, sa in enumerate(candidates(sigma)):
            if n >= cap:
                raise CapError(cap, "abstract candidates")
            if c(sa, sigma):
                found = True
                break
        ok.append(found)
    return ok


def _link_failure(s: Stream, g: IntvPred, ok: list, d: Optional[Interval]) -> Optional[Interval]:
    ev = Evaluator(s)
    n = len(s)
    if d is not None:
        cands = [] if d.is_empty else [(d.lo - s.start, d.hi - s.start)]
    else:
        rows = ev.table(g).rows.tolist()
        cands = [(i, j) for i in range(n) for j in range(i, n) if (rows[i] >> j) & 1]
    for i, j in cands:
        if d is not None and not ev.holds(g, Interval(i + s.start, j + s.start)):
            continue
        if i == 0 or not ok[i - 1]:
            continue
        if not all(ok[i:j + 1]):
            return Interval(i + s.start, j + s.start)
    return None


def check_link(g: IntvPred, c: SimFn, Y: Iterable[Loc], samples: Iterable[Any],
               candidates: Callable[[MemState], Iterable[Any]] = _empty_abstract,
               cap: Optional[int] = None, workers: int = 1) -> Verdict:
    """Bounded check of ``g link_Y c`` on sampled concrete streams.

    ``samples`` holds streams (every subinterval is checked) or
    ``(interval, stream)`` pairs.  The abstract stream may be chosen
    freshly at each time, so a witness exists exactly when every time of
    the interval admits an abstract state pairing with the concrete one,
    given that the predecessor time does.
    """
    items = []
    for smp in samples:
        if isinstance(smp, Stream):
            items.append((None, smp))
        else:
            d, s = smp
            items.append((d, s))

    def one(i: int) -> Optional[Interval]:
        d, s = items[i]
        ok = link_ok_times(s, c, candidates, cap)
        return _link_failure(s, g, ok, d)

    results = parallel_map(one, len(items), workers)
    for (d, s), bad in zip(items, results):
        if bad is not None:
            return Verdict(COUNTEREXAMPLE, (s, bad), len(items))
    return Verdict(HOLDS, None, len(items))


def _init_of(C: Cmd):
    node = C
    while isinstance(node, (Context, Init)):
        if isinstance(node, Init):
            return node.c
        node = node.c
    return None


def check_data_refinement(A: Cmd, C: Cmd, sim: SimFn, P: Iterable[str], Y: Iterable[Loc], Z: Iterable[Loc],
                          horizon: int, valdom: Iterable[Any] = (1, 2),
                          mode: Union[str, Mode] = "exhaustive", *, seed: int = 0, count: int = 1000,
                          cap: Optional[int] = None, streams: Optional[Sequence[Stream]] = None,
                          abstract_states: Callable[[], Iterable[MemState]] = lambda: (),
                          candidates: Callable[[MemState], Iterable[Any]] = _empty_abstract,
                          split: Optional[Callable[[MemState], bool]] = None,
                          witness: Optional[Callable[[Stream], Optional[Stream]]] = None,
                          intervals: str = "execution", workers: int = 1) -> Verdict:
    """Bounded data refinement: initialisation, the link obligation and the enforced-simulation refinement.

    ``sim`` takes an abstract and a concrete state (a fused state may be
    passed as both).  The link obligation is checked on the intervals
    where ``split`` holds throughout and where it fails throughout, plus
    on every interval when no split is given.  The refinement obligation
    needs ``witness`` to fuse each concrete stream with an abstract one.
    """
    P = tuple(sorted(P))
    gen = Generator(C, P, Z, horizon, valdom)
    if streams is None:
        m = Mode.of(mode, seed, count)
        streams = gen.exhaustive(cap) if m.kind == "exhaustive" else gen.random_walks(m.seed, m.count)
    parts: dict = {}

    # initialisation
    a_init = _init_of(A)
    c_init = _init_of(C)
    a_fn = _cond_fn(a_init) if a_init is not None else (lambda sigma: True)
    c_fn = _cond_fn(c_init) if c_init is not None else (lambda sigma: True)
    bad = None
    n = 0
    for sc in gen.initial_states():
        if not c_fn(sc):
            continue
        for sa in abstract_states():
            n += 1
            if sim(sa, sc) and not a_fn(sa):
                bad = (Stream(0, (sc,)), Interval(0, 0))
                break
        if bad:
            break
    parts["refinit"] = Verdict(COUNTEREXAMPLE, bad, n) if bad else Verdict(HOLDS, None, n)

    # link obligation
    if split is None:
        parts["ref1"] = check_link(TRUE, sim, Y, streams, candidates, cap, workers)
    else:
        not_split = lambda sigma: not split(sigma)  # noqa: E731
        parts["ref1:split"] = check_link(BoxDot(split), sim, Y, streams, candidates, cap, workers)
        parts["ref1:not-split"] = check_link(BoxDot(not_split), sim, Y, streams, candidates, cap, workers)

    # enforced simulation
    if witness is not None:
        enforced = Enf(BoxDot(lambda sigma: sim(sigma, sigma)), C)
        gA, gC = beh(P, Y, A), beh(P, Z, enforced)

        def one(i: int):
            fused = witness(streams[i])
            if fused is None:
                return ("no-witness", execution_interval(streams[i]))
            d = _refines_on(fused, gA, gC, intervals)
            return None if d is None else ("fails", d, fused)

        results = parallel_map(one, len(streams), workers)
        verdict = Verdict(HOLDS, None, len(streams))
        for s, r in zip(streams, results):
            if r is None:
                continue
            if r[0] == "no-witness":
                verdict = Verdict(COUNTEREXAMPLE, (s, r[1]), len(streams), note="no abstract witness")
            else:
                verdict = Verdict(COUNTEREXAMPLE, (r[2], r[1]), len(streams))
            break
        parts["ref2"] = verdict

    ok = all(v.holds for v in parts.values())
    first_bad = next((v for v in parts.values() if not v.holds), None)
    return Verdict(HOLDS if ok else COUNTEREXAMPLE, None if ok else first_bad.witness,
                   len(streams), parts=parts)


# -- histories ---------------------------------------------------------

def extract_history(s: Stream, history_var: Loc) -> History:
    """The final value of a recorded history variable."""
    v = s.states[-1][history_var]
    if not isinstance(v, tuple):
        raise HistoryError(f"{history_var} does not hold a sequence of events")
    return History(tuple(v))
