"""Stack case study: the sequential oracle, the abstract and Treiber-style programs.

Programs
--------
``AS``/``BS``
    sequence-based specifications guarded by exclusive access (``AS``)
    or by interference freedom for push and non-empty pop (``BS``).
``LS``
    a coarse-grained linked-list stack with large atomic blocks.
``TS``
    the fine-grained Treiber stack using CAS on a counted top pointer.
``HAS``/``HLS``
    ``BS``/``LS`` extended with the recorded histories ``HA``/``HL``.
``HTS``/``WHLS``
    ``TS`` with a recorded history, and ``HLS`` with the weakened pop
    whose emptiness test sits outside the interference-free block.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Optional, Sequence

from .commands import (
    AssignAddr, AssignVar, Chaos, Cmd, Context, Enf, Guard, Idle, Init, IntFree, Label, Not,
    OnlyAccessedBy, Omega, Par, WriteSomeLoc, cas_fail, cas_ok, choice, end_record, event_expr,
    new_node, seq, snoc, start_record,
)
from .executor import execution_interval
from .histories import (
    Event, History, HistoryError, Kind, SequentialOracle, hw_witnesses, linearisable_linrel,
)
from .intervals import And, Stream
from .memstate import (
    KEY, NXT, ONE, ZERO, Const, FieldAddr, FieldVal, MemState, Unary, Universe, Var, W, binop,
    ctr, deref, is_addr, ptr,
)
from .values import EMPTY, NULL, PtrCtr, same

TOP = 1
HEAP_BASE = 10
FADDR = "FAddr"
S = "S"
HA = "HA"
HL = "HL"

PROGRAMS = ("AS", "BS", "LS", "TS", "HAS", "HLS", "HTS", "WHLS")


class ConfigError(ValueError):
    """A stack configuration is too small for the requested program."""


class HeapShapeError(ValueError):
    """The list rooted at ``Top`` is cyclic or dangling."""


@dataclass(frozen=True)
class StackConfig:
    """Finite parameters of a stack program.

    ``ops_per_proc`` bounds (exactly) the per-process operation loop;
    ``script`` optionally fixes each process's operation sequence, e.g.
    ``{"p": ("push", "pop"), "q": ("pop",)}``.
    """

    processes: tuple = ("p", "q")
    valdom: tuple = (1, 2)
    heap_slots: Optional[int] = None
    ops_per_proc: Any = 1
    script: Optional[Mapping[str, Sequence[str]]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "processes", tuple(self.processes))
        object.__setattr__(self, "valdom", tuple(self.valdom))
        if not self.processes:
            raise ConfigError("at least one process is needed")
        if len(set(self.processes)) != len(self.processes):
            raise ConfigError("process ids must be distinct")
        if not self.valdom:
            raise ConfigError("the value domain must be nonempty")
        if self.script is not None:
            for p, ops in self.script.items():
                if p not in self.processes:
                    raise ConfigError(f"script names unknown process {p!r}")
                for op in ops:
                    if op not in ("push", "pop"):
                        raise ConfigError(f"unknown operation {op!r}")
        if self.heap_slots is not None and self.heap_slots < self.max_pushes():
            raise ConfigError(f"{self.heap_slots} heap slots cannot serve {self.max_pushes()} pushes")

    def ops_of(self, p: str) -> int:
        if self.script is not None:
            return len(self.script.get(p, ()))
        if isinstance(self.ops_per_proc, Mapping):
            return int(self.ops_per_proc.get(p, 0))
        return int(self.ops_per_proc)

    def max_pushes(self) -> int:
        if self.script is not None:
            return sum(ops.count("push") for ops in self.script.values())
        return sum(self.ops_of(p) for p in self.processes)

    @property
    def slots(self) -> int:
        return self.heap_slots if self.heap_slots is not None else max(1, self.max_pushes())

    def slot_starts(self) -> tuple:
        return tuple(HEAP_BASE + 2 * i for i in range(self.slots))

    def heap(self) -> tuple:
        return tuple(a for s in self.slot_starts() for a in (s, s + 1))


# -- the sequential stack --------------------------------------------------

def _stack_step(state: tuple, op: str, args: tuple) -> list:
    if op == "push":
        if len(args) != 1:
            return []
        return [((args[0],) + state, ())]
    if op == "pop":
        if args:
            return []
        if not state:
            return [((), (EMPTY,))]
        return [(state[1:], (state[0],))]
    raise HistoryError(f"the stack has no operation {op!r}")


def stack_oracle() -> SequentialOracle:
    """Push prepends; pop returns ``Empty`` on the empty stack, else the head."""
    return SequentialOracle((), _stack_step)


# -- abstraction of the linked representation ---------------------------

def _walk(sigma: MemState, strict: bool) -> tuple:
    keys, addrs = [], []
    seen = set()
    try:
        a = sigma[TOP]
    except Exception:
        if strict:
            raise HeapShapeError("no Top location")
        return (), ()
    a = a.ptr if isinstance(a, PtrCtr) else None
    if a is None:
        if strict:
            raise HeapShapeError("Top does not hold a (pointer, counter) pair")
        return (), ()
    idx = sigma.universe.loc_index
    while a is not NULL:
        if not is_addr(a) or a in seen or a not in idx or a + 1 not in idx:
            if strict:
                raise HeapShapeError(f"bad link {a!r} in the Top-rooted list")
            break
        seen.add(a)
        addrs += [a, a + 1]
        keys.append(sigma[a + KEY.offset])
        a = sigma[a + NXT.offset]
    return tuple(keys), tuple(addrs)


def stack_abstraction(sigma: MemState) -> tuple:
    """The key sequence of the null-terminated list starting at ``ptr(*Top)``."""
    return _walk(sigma, strict=True)[0]


def saddr(sigma: MemState) -> frozenset:
    """Key and next addresses of the nodes reachable from ``Top``."""
    return frozenset(_walk(sigma, strict=False)[1])


def _saddr_top(sigma: MemState) -> frozenset:
    return saddr(sigma) | {TOP}


def _t_init(sigma: MemState) -> bool:
    try:
        top, free = sigma[TOP], sigma[FADDR]
    except Exception:
        return False
    addrs = {a for a in sigma.universe.locations if is_addr(a)}
    return same(top, PtrCtr(NULL, 0)) and isinstance(free, frozenset) and free <= addrs - {TOP}


_t_init.__name__ = "TInit"


def _s_empty(sigma: MemState) -> bool:
    try:
        return sigma[S] == ()
    except Exception:
        return False


_s_empty.__name__ = "S=<>"


# -- building blocks ----------------------------------------------------

def _inv(op: str, p: str, *args):
    return event_expr(op, p, Kind.INVOKE, *args)


def _res(op: str, p: str, *args):
    return event_expr(op, p, Kind.RESPONSE, *args)


def _a_record(p: str, inv, resp):
    return end_record(p, HA, snoc(HA, inv, resp))


def _l_record(p: str, inv, resp):
    return And(start_record(p, HL, snoc(HL, inv)), end_record(p, HL, snoc(HL, resp)))


def _per_proc_loop(p: str, cfg: StackConfig, push, pop, wrap) -> Cmd:
    """Either the exact-bound ω loop over ``wrap(push ⊓ pop)`` or the scripted sequence."""
    if cfg.script is not None:
        steps = []
        for op in cfg.script.get(p, ()):
            body = choice([push(x) for x in cfg.valdom]) if op == "push" else pop()
            steps.append(wrap(body))
        return seq(*steps)
    ops = cfg.ops_of(p)
    body = wrap(choice([push(x) for x in cfg.valdom] + [pop()]))
    return Omega(body, bound=ops, exact=True)


def _idle_wrap(c: Cmd) -> Cmd:
    return seq(Idle(), c, Idle())


# sequence specifications

def _s_push(x: Any) -> Cmd:
    return AssignVar(S, binop("cons", Const(x), Var(S)))


def _s_empty_cmd(arv: str) -> Cmd:
    return seq(Guard(binop("==", Var(S), Const(()))), AssignVar(arv, Const(EMPTY)))


def _s_do_pop(arv: str) -> Cmd:
    return seq(Guard(binop("!=", Var(S), Const(()))),
               AssignVar(arv, Unary("head", Var(S))),
               AssignVar(S, Unary("tail", Var(S))))


def _oab_s(p: str):
    return OnlyAccessedBy(Var(S), p)


def _intfree_s(p: str):
    return IntFree(Var(S), p)


def _as_thread(p: str, cfg: StackConfig, weak: bool) -> Cmd:
    arv = f"arv_{p}"
    guard_push = _intfree_s if weak else _oab_s
    guard_pop = _intfree_s if weak else _oab_s

    def push(x):
        return Enf(guard_push(p), _s_push(x))

    def pop():
        return choice([Enf(_oab_s(p), _s_empty_cmd(arv)), Enf(guard_pop(p), _s_do_pop(arv))])

    return Context({arv}, _per_proc_loop(p, cfg, push, pop, _idle_wrap))


def _has_thread(p: str, cfg: StackConfig) -> Cmd:
    arv = f"arv_{p}"

    def push(x):
        return Enf(_a_record(p, _inv("push", p, x), _res("push", p)), Enf(_intfree_s(p), _s_push(x)))

    def pop():
        rec = lambda: _a_record(p, _inv("pop", p), _res("pop", p, Var(arv)))  # noqa: E731
        return choice([Enf(rec(), Enf(_oab_s(p), _s_empty_cmd(arv))),
                       Enf(rec(), Enf(_intfree_s(p), _s_do_pop(arv)))])

    return _per_proc_loop(p, cfg, push, pop, _idle_wrap)


def _seq_program(threads: dict, cfg: StackConfig, history: bool) -> Cmd:
    store = {S: ()}
    if history:
        store[HA] = ()
    for p in cfg.processes:
        store[f"arv_{p}"] = 0
    return Context({S}, Init(_s_empty, Par(tuple(threads.items())), store))


# linked-list programs

def _top() -> Const:
    return Const(TOP)


def _env_st(p: str) -> Cmd:
    return Enf(Not(WriteSomeLoc(_saddr_top, p)), Chaos())


def _l_setup(p: str, cfg: StackConfig, x: Any) -> Cmd:
    n = f"n_{p}"
    return seq(new_node(p, n, FADDR, cfg.slot_starts()), AssignAddr(FieldAddr(Var(n), KEY), Const(x)))


def _push_locs(p: str):
    n = f"n_{p}"

    def locs(sigma: MemState) -> frozenset:
        out = set(_saddr_top(sigma))
        a = sigma[n]
        if is_addr(a):
            out |= {a + KEY.offset, a + NXT.offset}
        return frozenset(out)
    return locs


def _l_do_push(p: str) -> Cmd:
    n = f"n_{p}"
    top = deref(_top())
    body = seq(AssignAddr(FieldAddr(Var(n), NXT), ptr(top)),
               AssignAddr(_top(), binop("pair", Var(n), binop("+", ctr(top), 1))))
    return Enf(IntFree(_push_locs(p), p), body)


def _l_push(p: str, cfg: StackConfig, x: Any) -> Cmd:
    return seq(_l_setup(p, cfg, x), _env_st(p), _l_do_push(p))


def _l_empty(p: str) -> Cmd:
    rv = f"rv_{p}"
    return seq(Guard(binop("==", ptr(deref(_top())), NULL)), AssignVar(rv, Const(EMPTY)))


def _pop_body(p: str) -> tuple:
    rv = f"rv_{p}"
    top = deref(_top())
    return (AssignVar(rv, FieldVal(ptr(top), KEY)),
            AssignAddr(_top(), binop("pair", FieldVal(ptr(top), NXT), binop("+", ctr(top), 1))))


def _l_do_pop(p: str) -> Cmd:
    top = deref(_top())
    return Enf(IntFree(_saddr_top, p), seq(Guard(binop("!=", ptr(top), NULL)), *_pop_body(p)))


def _weak_do_pop(p: str) -> Cmd:
    top = deref(_top())
    return seq(Guard(binop("!=", ptr(top), NULL)), Enf(IntFree(_top(), p), seq(*_pop_body(p))))


def _ls_thread(p: str, cfg: StackConfig, history: bool, weak: bool = False) -> Cmd:
    n, rv = f"n_{p}", f"rv_{p}"
    do_pop = _weak_do_pop if weak else _l_do_pop

    def push(x):
        body = _l_push(p, cfg, x)
        return Enf(_l_record(p, _inv("push", p, x), _res("push", p)), body) if history else body

    def pop():
        if history:
            rec = lambda: _l_record(p, _inv("pop", p), _res("pop", p, Var(rv)))  # noqa: E731
            return seq(_env_st(p), choice([Enf(rec(), _l_empty(p)), Enf(rec(), do_pop(p))]))
        return seq(_env_st(p), choice([_l_empty(p), do_pop(p)]))

    return Context({n, rv}, _per_proc_loop(p, cfg, push, pop, _idle_wrap))


# the Treiber stack

def _ts_thread(p: str, cfg: StackConfig, history: bool) -> Cmd:
    t, n, tn, rv = f"t_{p}", f"n_{p}", f"tn_{p}", f"rv_{p}"
    top = _top()
    read_top = lambda lab: Label(lab, AssignVar(t, deref(top)))  # noqa: E731

    def push(x):
        setup = seq(Label("h1", new_node(p, n, FADDR, cfg.slot_starts())),
                    Label("h2", AssignAddr(FieldAddr(Var(n), KEY), Const(x))))
        link = Label("h4", AssignAddr(FieldAddr(Var(n), NXT), ptr(Var(t))))
        try_push = seq(read_top("h3"), link, Label("hf5", cas_fail(p, top, Var(t))))
        new_top = binop("pair", Var(n), binop("+", ctr(Var(t)), 1))
        do_push = seq(read_top("h3"), link, Label("ht5", cas_ok(p, top, Var(t), new_top)))
        body = seq(setup, Omega(try_push), do_push)
        if history:
            body = Enf(_l_record(p, _inv("push", p, x), _res("push", p)), body)
        return body

    def pop():
        to_cas = seq(read_top("l1"),
                     Label("lf2", Guard(binop("!=", ptr(Var(t)), NULL))),
                     Label("l5", AssignVar(tn, FieldVal(ptr(Var(t)), NXT))),
                     Label("l6", AssignVar(rv, FieldVal(ptr(Var(t)), KEY))))
        try_pop = seq(to_cas, Label("lf7", cas_fail(p, top, Var(t))))
        empty = seq(read_top("l1"),
                    Label("lt2", Guard(binop("==", ptr(Var(t)), NULL))),
                    Label("l5", AssignVar(rv, Const(EMPTY))))
        new_top = binop("pair", Var(tn), binop("+", ctr(Var(t)), 1))
        do_pop = seq(to_cas, Label("lt7", cas_ok(p, top, Var(t), new_top)))
        body = seq(Omega(try_pop), choice([empty, do_pop]))
        if history:
            body = Enf(_l_record(p, _inv("pop", p), _res("pop", p, Var(rv))), body)
        return body

    def wrap(c: Cmd) -> Cmd:
        return seq(Label("pidle", Idle()), c)

    return Context({t, n, tn, rv}, _per_proc_loop(p, cfg, push, pop, wrap))


def _linked_program(threads: dict, cfg: StackConfig, history: bool) -> Cmd:
    store: dict = {TOP: PtrCtr(NULL, 0), FADDR: frozenset(cfg.heap())}
    for s in cfg.slot_starts():
        store[s + KEY.offset] = 0
        store[s + NXT.offset] = NULL
    if history:
        store[HL] = ()
    for p in cfg.processes:
        for v in ("t", "n", "tn", "rv"):
            store[f"{v}_{p}"] = 0
    return Context({TOP, FADDR}, Init(_t_init, Par(tuple(threads.items())), store))


def build_program(name: str, cfg: StackConfig = StackConfig()) -> Cmd:
    """The command tree of a named stack program over ``cfg``'s finite domains."""
    name = name.upper()
    procs = cfg.processes
    if name in ("AS", "BS"):
        return _seq_program({p: _as_thread(p, cfg, weak=name == "BS") for p in procs}, cfg, False)
    if name == "HAS":
        return _seq_program({p: _has_thread(p, cfg) for p in procs}, cfg, True)
    if name in ("LS", "HLS", "WHLS"):
        history = name != "LS"
        threads = {p: _ls_thread(p, cfg, history, weak=name == "WHLS") for p in procs}
        return _linked_program(threads, cfg, history)
    if name in ("TS", "HTS"):
        history = name == "HTS"
        return _linked_program({p: _ts_thread(p, cfg, history) for p in procs}, cfg, history)
    raise ConfigError(f"unknown program {name!r}; expected one of {', '.join(PROGRAMS)}")


def history_var(name: str) -> Optional[str]:
    """The recorded history variable of a program, if it has one."""
    name = name.upper()
    if name == "HAS":
        return HA
    if name in ("HLS", "HTS", "WHLS"):
        return HL
    return None


# -- simulation ---------------------------------------------------------

@functools.lru_cache(maxsize=65536)
def _lin_cached(hl: tuple, ha: tuple, valdom: tuple) -> bool:
    try:
        return linearisable_linrel(History(hl), History(ha), valdom) is not None
    except HistoryError:
        return False


def sim_ts(sigma_abs: MemState, sigma_conc: MemState, valdom: Sequence[Any] = (1, 2)) -> bool:
    """``S = Stack ∧ (∀p. W.S.p ⇔ W.Top.p) ∧ linearisable(HL, HA)``."""
    try:
        stack = stack_abstraction(sigma_conc)
    except HeapShapeError:
        return False
    if sigma_abs[S] != stack:
        return False
    for p in sigma_conc.universe.procs:
        if W(sigma_abs, S, p) != W(sigma_conc, TOP, p):
            return False
    hl, ha = sigma_conc[HL], sigma_abs[HA]
    if not isinstance(hl, tuple) or not isinstance(ha, tuple):
        return False
    return _lin_cached(hl, ha, tuple(valdom))


def abstract_universe(procs: Sequence[str]) -> Universe:
    return Universe((S, HA) + tuple(f"arv_{p}" for p in procs), tuple(procs))


def sim_candidates(valdom: Sequence[Any] = (1, 2)):
    """Abstract states worth pairing with a concrete one: one per linearisation of ``HL``."""
    oracle = stack_oracle()

    def candidates(sigma_conc: MemState):
        procs = sigma_conc.universe.procs
        U = abstract_universe(procs)
        try:
            stack = stack_abstraction(sigma_conc)
        except HeapShapeError:
            return
        row_s = tuple(ONE if W(sigma_conc, TOP, p) else ZERO for p in procs)
        zero = tuple(ZERO for _ in procs)
        rest = tuple(zero for _ in procs)
        for hs in hw_witnesses(History(sigma_conc[HL]), oracle, valdom):
            yield MemState(U, (stack, tuple(hs.events)) + tuple(0 for _ in procs), (row_s, zero) + rest)
    return candidates


def abstract_states(procs: Sequence[str], valdom: Sequence[Any] = (1, 2), depth: int = 2) -> Iterable[MemState]:
    """Small abstract states: stacks up to ``depth`` elements, a few short histories, no permissions."""
    U = abstract_universe(procs)
    zero = tuple(ZERO for _ in procs)
    histories = [(), (Event("push", procs[0], Kind.INVOKE, (valdom[0],)), Event("push", procs[0], Kind.RESPONSE, ()))]
    for k in range(depth + 1):
        for stack in itertools.product(valdom, repeat=k):
            for h in histories:
                yield MemState(U, (tuple(stack), h) + tuple(0 for _ in procs), tuple(zero for _ in U.locations))


def writes_top(sigma: MemState) -> bool:
    """``∃p. W.Top.p``, the split predicate for the link obligation."""
    return any(W(sigma, TOP, p) for p in sigma.universe.procs)


# -- the fused witness for the enforced-simulation refinement ------------

@dataclass
class _Op:
    proc: str
    kind: str
    inv: int
    res: int
    value: Any = None
    write: Optional[tuple] = None
    rv_write: Optional[tuple] = None
    reads: tuple = ()
    window: Optional[tuple] = None


def _runs(mask: list) -> list:
    out, start = [], None
    for t, b in enumerate(mask + [False]):
        if b and start is None:
            start = t
        elif not b and start is not None:
            out.append((start, t - 1))
            start = None
    return out


def _hl_ops(s: Stream) -> Optional[list]:
    states = s.states
    ops, open_ = [], {}
    for t in range(1, len(states)):
        before, after = states[t - 1][HL], states[t][HL]
        if after == before:
            continue
        if len(after) != len(before) + 1 or after[:-1] != before:
            return None
        ev = after[-1]
        if ev.kind is Kind.INVOKE:
            open_[ev.proc] = (ev, t)
        else:
            inv_ev, t0 = open_.pop(ev.proc)
            val = inv_ev.values[0] if inv_ev.op_id == "push" else (ev.values[0] if ev.values else None)
            ops.append(_Op(ev.proc, inv_ev.op_id, t0, t, val))
    if open_:
        return None
    return ops


def fused_witness(valdom: Sequence[Any] = (1, 2)):
    """Builds, for a stream of ``HLS``, an abstract ``HAS`` stream fused with it.

    ``S`` follows the concrete stack and is written exactly when ``Top``
    is.  A push or non-empty pop is recorded in ``HA`` when the same
    operation is recorded in ``HL``.  An empty pop is placed in a window
    where the stack is empty and nobody writes ``Top``.
    """

    def build(s: Stream) -> Optional[Stream]:
        U = s.states[0].universe
        procs = U.procs
        T = s.end
        ops = _hl_ops(s)
        if ops is None:
            return None
        stacks = []
        for sigma in s.states:
            try:
                stacks.append(stack_abstraction(sigma))
            except HeapShapeError:
                return None
        top_w = {p: [W(sigma, TOP, p) for sigma in s.states] for p in procs}
        any_top = [any(top_w[p][t] for p in procs) for t in range(T + 1)]
        for op in ops:
            p = op.proc
            if op.kind == "push" or op.value is not EMPTY:
                runs = [r for r in _runs(top_w[p]) if op.inv <= r[0] <= op.res]
                if len(runs) != 1 or runs[0][1] != op.res:
                    return None
                w = runs[0][0]
                op.write = runs[0]
                if op.kind == "push":
                    if stacks[w] != (op.value,) + stacks[w - 1]:
                        return None
                    op.reads = (w - 1,)
                else:
                    rv_mask = [W(sigma, f"rv_{p}", p) for sigma in s.states]
                    rruns = [r for r in _runs(rv_mask) if op.inv <= r[0] < w]
                    if len(rruns) != 1:
                        return None
                    c, d = rruns[0]
                    if c - 2 < op.inv:
                        return None
                    if not stacks[c - 2] or stacks[c - 1][0] != s.states[c][f"rv_{p}"] or d + 1 > w - 1:
                        return None
                    if stacks[w] != stacks[w - 1][1:]:
                        return None
                    op.rv_write = (c, d)
                    op.reads = (c - 2, c - 1, w - 1)
        if not _place_empty_pops(ops, stacks, any_top, s):
            return None
        return _assemble(s, ops, stacks, procs)

    return build


def _op_span(op: _Op) -> tuple:
    if op.window is not None:
        return op.window
    start = min(op.reads) if op.reads else op.inv
    return (start, op.res)


def _place_empty_pops(ops: list, stacks: list, any_top: list, s: Stream) -> bool:
    empties = [op for op in ops if op.kind == "pop" and op.value is EMPTY]
    fixed = [op for op in ops if op not in empties]
    records = {op.res for op in fixed}

    def prev_end(op: _Op) -> int:
        ends = [_op_span(o)[1] for o in ops if o.proc == op.proc and o.res < op.res and (o in fixed or o.window)]
        return max(ends, default=0)

    def feasible(op: _Op, g: int, r: int, placed: list) -> bool:
        if g <= prev_end(op) or stacks[g] != ():
            return False
        if any(any_top[t] for t in range(g, r + 1)):
            return False
        if r in records or any(o.window and o.window[1] == r for o in placed):
            return False
        for o in fixed:
            if o.proc != op.proc and any(g <= t <= r for t in o.reads):
                return False
        for o in placed:
            a, b = o.window
            if not (b < g or r < a):
                return False
        return True

    def place(i: int, placed: list) -> bool:
        if i == len(empties):
            return True
        op = empties[i]
        for r in range(max(op.inv, 3), op.res + 1):
            for g in range(r - 3, 0, -1):
                if feasible(op, g, r, placed):
                    op.window = (g, r)
                    if place(i + 1, placed + [op]):
                        return True
                    op.window = None
        return False

    return place(0, [])


def _assemble(s: Stream, ops: list, stacks: list, procs: tuple) -> Stream:
    Uc = s.states[0].universe
    extra = (S, HA) + tuple(f"arv_{p}" for p in procs)
    Uf = Universe(tuple(Uc.locations) + tuple(l for l in extra if l not in Uc.loc_index), procs)
    T = s.end
    n = len(procs)
    share = Fraction(1, max(2, n))
    ambient = tuple(share for _ in procs)
    half = Fraction(1, 2)

    ha = [()] * (T + 1)
    ha_writer: dict = {}
    arv = {p: [0] * (T + 1) for p in procs}
    arv_w = {p: [False] * (T + 1) for p in procs}
    s_excl: dict = {}
    arv_events: dict = {p: [] for p in procs}
    rec_events = []
    for op in ops:
        p = op.proc
        if op.window is not None:
            g, r = op.window
            for t in range(g, r + 1):
                s_excl[t] = p
            arv_events[p].append((r - 1, r, EMPTY))
            rec_events.append((r, op))
        else:
            rec_events.append((op.res, op))
            if op.rv_write is not None:
                c, d = op.rv_write
                arv_events[p].append((c, d, s.states[c][f"rv_{p}"]))
    rec_events.sort(key=lambda e: e[0])
    for p in procs:
        for t in range(T + 1):
            val = arv[p][t - 1] if t > 0 else 0
            for a, b, v in arv_events[p]:
                if a <= t <= b:
                    val, arv_w[p][t] = v, True
            arv[p][t] = val
    cur = ()
    ri = 0
    for t in range(T + 1):
        while ri < len(rec_events) and rec_events[ri][0] == t:
            _, op = rec_events[ri]
            cur = cur + _events_of(op, arv, t)
            ha_writer[t] = op.proc
            ri += 1
        ha[t] = cur

    states = []
    for t, sigma in enumerate(s.states):
        vals = list(sigma.values) + [None] * (len(Uf.locations) - len(Uc.locations))
        rows = list(sigma.perms) + [None] * (len(Uf.locations) - len(Uc.locations))
        idx = Uf.loc_index
        vals[idx[S]] = stacks[t]
        writer = next((p for p in procs if W(sigma, TOP, p)), None)
        if writer is not None:
            rows[idx[S]] = tuple(ONE if q == writer else ZERO for q in procs)
        elif t in s_excl:
            rows[idx[S]] = tuple(half if q == s_excl[t] else ZERO for q in procs)
        else:
            rows[idx[S]] = ambient
        vals[idx[HA]] = ha[t]
        hw = ha_writer.get(t)
        rows[idx[HA]] = tuple(ONE if q == hw else ZERO for q in procs) if hw is not None else ambient
        for p in procs:
            i = idx[f"arv_{p}"]
            vals[i] = arv[p][t]
            rows[i] = tuple(ONE if q == p else ZERO for q in procs) if arv_w[p][t] else ambient
        states.append(MemState(Uf, tuple(vals), tuple(rows)))
    return Stream(s.start, tuple(states))


def _events_of(op: _Op, arv: dict, t: int) -> tuple:
    p = op.proc
    if op.kind == "push":
        return (Event("push", p, Kind.INVOKE, (op.value,)), Event("push", p, Kind.RESPONSE, ()))
    return (Event("pop", p, Kind.INVOKE, ()), Event("pop", p, Kind.RESPONSE, (arv[p][t - 1],)))
