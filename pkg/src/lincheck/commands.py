"""Command syntax and its behaviour function.

``beh(P, Z, C)`` maps a command executed by processes ``P`` in context
``Z`` to an interval predicate.  Enforced conditions that constrain
permissions are built from the :class:`PermCond` family so that the
stream generator can read them as scheduling claims.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Optional, Sequence, Union

from .histories import Event, Kind
from .intervals import (
    FALSE, NONEMPTY, TRUE, And, BoxDot, Ceil, Chop, Derived, DiamondDot, ExistsValue,
    Implies, IntvPred, Not, Ola, Omega as OmegaPred, Or, Ora, Prev, StateCond, _cond_fn,
)
from .memstate import (
    Apply, Binary, Const, Deref, EvalError, Expr, FieldAddr, Loc, MemState, NXT, R, Var, W,
    D, accessed, binop, deref, is_addr, lift, value_of,
)
from .values import UNDEF, same, show, value_key

ProcSet = Union[str, Iterable[str]]


def pc_var(p: str) -> str:
    """The auxiliary program-counter variable of process ``p``."""
    return f"pc_{p}"


# -- command syntax -----------------------------------------------------

class Cmd:
    """Base class of command nodes (compared by identity)."""


@dataclass(frozen=True, eq=False)
class Chaos(Cmd):
    def __repr__(self):
        return "Chaos"


@dataclass(frozen=True, eq=False)
class Idle(Cmd):
    def __repr__(self):
        return "Idle"


@dataclass(frozen=True, eq=False)
class Guard(Cmd):
    c: Expr

    def __repr__(self):
        return f"[{self.c!r}]"


@dataclass(frozen=True, eq=False)
class AssignVar(Cmd):
    v: str
    e: Expr

    def __repr__(self):
        return f"{self.v} := {self.e!r}"


@dataclass(frozen=True, eq=False)
class AssignAddr(Cmd):
    ae: Expr
    e: Expr

    def __repr__(self):
        return f"{self.ae!r} := {self.e!r}"


@dataclass(frozen=True, eq=False)
class Seq(Cmd):
    c1: Cmd
    c2: Cmd

    def __repr__(self):
        return f"({self.c1!r} ; {self.c2!r})"


@dataclass(frozen=True, eq=False, init=False)
class Choice(Cmd):
    branches: tuple

    def __init__(self, *branches: Cmd) -> None:
        if not branches:
            raise ValueError("a choice needs at least one branch")
        object.__setattr__(self, "branches", tuple(branches))

    def __repr__(self):
        return "(" + " ⊓ ".join(map(repr, self.branches)) + ")"


@dataclass(frozen=True, eq=False)
class Omega(Cmd):
    """``C^ω``; ``bound`` and ``exact`` only steer the stream generator."""

    c: Cmd
    bound: Optional[int] = None
    exact: bool = False

    def __repr__(self):
        return f"({self.c!r})^ω"


@dataclass(frozen=True, eq=False)
class Par(Cmd):
    branches: tuple

    def __post_init__(self) -> None:
        branches = tuple((p, c) for p, c in self.branches)
        procs = [p for p, _ in branches]
        if len(set(procs)) != len(procs):
            raise ValueError("parallel branches need distinct process ids")
        object.__setattr__(self, "branches", branches)

    @property
    def procs(self) -> tuple:
        return tuple(p for p, _ in self.branches)

    def __repr__(self):
        return " ‖ ".join(f"{p}:{c!r}" for p, c in self.branches)


@dataclass(frozen=True, eq=False)
class Context(Cmd):
    Y: frozenset
    c: Cmd

    def __post_init__(self) -> None:
        object.__setattr__(self, "Y", frozenset(self.Y))

    def __repr__(self):
        return "Context{" + ",".join(map(str, sorted(self.Y, key=str))) + f"}} • {self.c!r}"


@dataclass(frozen=True, eq=False)
class Label(Cmd):
    l: str
    c: Cmd

    def __repr__(self):
        return f"{self.l}: {self.c!r}"


@dataclass(frozen=True, eq=False)
class Init(Cmd):
    """``Init c • C``; ``store`` gives the generator a concrete initial state."""

    c: Any
    body: Cmd
    store: Optional[dict] = None

    def __repr__(self):
        return f"Init • {self.body!r}"


@dataclass(frozen=True, eq=False)
class Enf(Cmd):
    d: IntvPred
    c: Cmd

    def __repr__(self):
        return f"Enf {self.d!r} • {self.c!r}"


@dataclass(frozen=True, eq=False)
class Rely(Cmd):
    r: IntvPred
    c: Cmd

    def __repr__(self):
        return f"Rely {self.r!r} • {self.c!r}"


def seq(*cs: Cmd) -> Cmd:
    """Right-nested sequential composition; the empty sequence is ``Idle``."""
    if not cs:
        return Idle()
    out = cs[-1]
    for c in reversed(cs[:-1]):
        out = Seq(c, out)
    return out


def choice(cs: Sequence[Cmd]) -> Cmd:
    cs = list(cs)
    return cs[0] if len(cs) == 1 else Choice(*cs)


# -- location specs -----------------------------------------------------

LocSpec = Union[Expr, Iterable[Loc], Callable[[MemState], Iterable[Loc]]]


def loc_fn(spec: LocSpec) -> Callable[[MemState], frozenset]:
    """Normalise a location specification to a state-dependent set."""
    if isinstance(spec, Expr):
        return lambda sigma: accessed(spec, sigma, strict=False)
    if callable(spec):
        return lambda sigma: frozenset(spec(sigma))
    fixed = frozenset(spec)
    return lambda sigma: fixed


def _known(sigma: MemState, locs: Iterable[Loc]) -> list:
    idx = sigma.universe.loc_index
    return [va for va in locs if va in idx and type(va) in (str, int)]


# -- permission predicates ----------------------------------------------

@dataclass(eq=False)
class PermCond(Derived):
    """A permission condition over a state-dependent location set."""

    locs: Any
    p: str

    def __post_init__(self) -> None:
        self.fn = loc_fn(self.locs)

    def __repr__(self):
        return f"{type(self).__name__}({self.locs!r}, {self.p})"


class OnlyAccessedBy(PermCond):
    """Every other process is denied access to the locations throughout."""

    def expand(self) -> IntvPred:
        fn, p = self.fn, self.p

        def cond(sigma: MemState) -> bool:
            others = [q for q in sigma.universe.procs if q != p]
            return all(D(sigma, va, q) for va in _known(sigma, fn(sigma)) for q in others)
        return BoxDot(cond)


class IntFree(PermCond):
    """No other process holds write permission to the locations throughout."""

    def expand(self) -> IntvPred:
        fn, p = self.fn, self.p

        def cond(sigma: MemState) -> bool:
            others = [q for q in sigma.universe.procs if q != p]
            return not any(W(sigma, va, q) for va in _known(sigma, fn(sigma)) for q in others)
        return BoxDot(cond)


class WriteSomeLoc(PermCond):
    """At some time the process holds write permission to one of the locations."""

    def expand(self) -> IntvPred:
        fn, p = self.fn, self.p

        def cond(sigma: MemState) -> bool:
            return any(W(sigma, va, p) for va in _known(sigma, fn(sigma)))
        return DiamondDot(cond)


@dataclass(eq=False)
class Local(Derived):
    """Locations ``VA`` are private to ``P``.

    Outsiders are denied access throughout.  With ``ambient`` set, members
    of ``P`` also read every location of ``VA`` that none of them writes.
    """

    VA: frozenset
    P: frozenset
    ambient: bool = True

    def expand(self) -> IntvPred:
        VA, P, ambient = frozenset(self.VA), frozenset(self.P), self.ambient

        def cond(sigma: MemState) -> bool:
            outsiders = [q for q in sigma.universe.procs if q not in P]
            members = [p for p in sigma.universe.procs if p in P]
            for va in _known(sigma, VA):
                if any(not D(sigma, va, q) for q in outsiders):
                    return False
                if ambient and not any(W(sigma, va, p) for p in members):
                    if not all(R(sigma, va, p) for p in members):
                        return False
            return True
        return BoxDot(cond)

    def __repr__(self):
        return f"Local({sorted(self.VA, key=str)}, {sorted(self.P)})"


@dataclass(eq=False)
class StartRecord(Derived):
    """``∃k. prev(⃗(e=k)) ∧ ⃖(v=k ∧ W.v.p)``."""

    v: str
    e: Expr
    p: str

    def expand(self) -> IntvPred:
        v, e, p = self.v, self.e, self.p

        def body(k: Any) -> IntvPred:
            return And(Prev(Ora(_eq_cond(e, k))), Ola(_written_as(v, k, p)))
        return ExistsValue(e, body, name="k")

    def __repr__(self):
        return f"start_record({self.v}, {self.e!r})"


@dataclass(eq=False)
class EndRecord(Derived):
    """``∃k. ⃗(e=k) ; ⌈v=k ∧ W.v.p⌉``."""

    v: str
    e: Expr
    p: str

    def expand(self) -> IntvPred:
        v, e, p = self.v, self.e, self.p

        def body(k: Any) -> IntvPred:
            return Chop(Ora(_eq_cond(e, k)), Ceil(_written_as(v, k, p)))
        return ExistsValue(e, body, name="k")

    def __repr__(self):
        return f"end_record({self.v}, {self.e!r})"


def _eq_cond(e: Expr, k: Any) -> Callable[[MemState], bool]:
    def cond(sigma: MemState) -> bool:
        return same(value_of(e, sigma), k)
    cond.__name__ = f"{e!r}={show(k)}"
    return cond


def _written_as(va: Loc, k: Any, p: str) -> Callable[[MemState], bool]:
    def cond(sigma: MemState) -> bool:
        try:
            return same(sigma[va], k) and W(sigma, va, p)
        except (EvalError, KeyError):
            return False
    cond.__name__ = f"{va}={show(k)}∧W"
    return cond


# -- behaviour building blocks ------------------------------------------

_PRED_CACHE: dict = {}


def idle_pred(p: str, Z: Iterable[Loc]) -> IntvPred:
    Z = frozenset(Z)
    if not Z:
        return TRUE
    # shared instances let an evaluator reuse one table for every occurrence
    key = (p, Z)
    g = _PRED_CACHE.get(key)
    if g is None:
        pairs = frozenset((va, p) for va in Z)

        def cond(sigma: MemState) -> bool:
            return pairs.isdisjoint(sigma.write_pairs)
        cond.__name__ = f"idle_{p}"
        g = _PRED_CACHE[key] = BoxDot(cond)
    return g


def _readable(e: Expr, p: str, sigma: MemState) -> bool:
    return all(R(sigma, va, p) for va in _known(sigma, accessed(e, sigma, strict=False)))


def _shared(kind: str, key: tuple, build: Callable[[], IntvPred]) -> IntvPred:
    try:
        full = (kind,) + key
        g = _PRED_CACHE.get(full)
    except TypeError:
        return build()
    if g is None:
        g = _PRED_CACHE[full] = build()
    return g


def eval_pred(p: str, Z: Iterable[Loc], e: Expr, k: Any) -> IntvPred:
    e = lift(e)
    Z = frozenset(Z)

    def build() -> IntvPred:
        def cond(sigma: MemState) -> bool:
            return same(value_of(e, sigma), k) and _readable(e, p, sigma)
        cond.__name__ = f"eval_{p}({e!r}={show(k)})"
        return And(DiamondDot(cond), idle_pred(p, Z))
    return _shared("eval", (p, Z, e, value_key(k)), build)


def update_pred(p: str, Z: Iterable[Loc], va: Loc, k: Any) -> IntvPred:
    rest = frozenset(Z) - {va}

    def build() -> IntvPred:
        return And(idle_pred(p, rest), NONEMPTY, BoxDot(_written_as(va, k, p)))
    return _shared("update", (p, rest, va, value_key(k)), build)


def _procs(P: ProcSet) -> tuple:
    if isinstance(P, str):
        return (P,)
    return tuple(sorted(P))


def beh(P: ProcSet, Z: Iterable[Loc], C: Cmd) -> IntvPred:
    """The interval predicate describing executions of ``C`` by ``P`` in context ``Z``."""
    return _beh(_procs(P), frozenset(Z), C)


def _single(P: tuple, what: str) -> str:
    if len(P) != 1:
        raise ValueError(f"{what} is defined for a single process, got {P}")
    return P[0]


def _beh(P: tuple, Z: frozenset, C: Cmd) -> IntvPred:
    if isinstance(C, Chaos):
        return TRUE
    if isinstance(C, Idle):
        return And(*[idle_pred(p, Z) for p in P]) if len(P) != 1 else idle_pred(P[0], Z)
    if isinstance(C, Guard):
        return Or(*[eval_pred(p, Z, C.c, True) for p in P])
    if isinstance(C, AssignVar):
        p = _single(P, "assignment")
        v, e = C.v, C.e
        return ExistsValue(e, lambda k: Chop(eval_pred(p, Z, e, k), update_pred(p, Z, v, k)), name="k")
    if isinstance(C, AssignAddr):
        p = _single(P, "assignment")
        ae, e = C.ae, C.e

        def per_addr(a: Any) -> IntvPred:
            if not is_addr(a):
                return FALSE
            return ExistsValue(e, lambda k: Chop(And(eval_pred(p, Z, ae, a), eval_pred(p, Z, e, k)),
                                                 update_pred(p, Z, a, k)), name="k")
        return ExistsValue(ae, per_addr, name="a")
    if isinstance(C, Seq):
        return Chop(_beh(P, Z, C.c1), _beh(P, Z, C.c2))
    if isinstance(C, Choice):
        return Or(*[_beh(P, Z, b) for b in C.branches])
    if isinstance(C, Omega):
        return OmegaPred(_beh(P, Z, C.c))
    if isinstance(C, Par):
        return _beh_par(P, Z, C)
    if isinstance(C, Context):
        if Z & C.Y:
            warnings.warn(f"context {sorted(C.Y, key=str)} overlaps enclosing context; behaviour is False",
                          stacklevel=2)
            return FALSE
        return And(Local(C.Y, frozenset(P), ambient=len(P) == 1), _beh(P, Z | C.Y, C.c))
    if isinstance(C, Label):
        l = C.l
        conds = []
        for p in P:
            pc = pc_var(p)
            conds.append(BoxDot(_label_cond(pc, l)))
        return And(*conds, _beh(P, Z, C.c))
    if isinstance(C, Init):
        return And(Prev(Ora(_cond_fn(C.c))), _beh(P, Z, C.body))
    if isinstance(C, Enf):
        return And(C.d, _beh(P, Z, C.c))
    if isinstance(C, Rely):
        return Implies(C.r, _beh(P, Z, C.c))
    raise TypeError(f"unknown command {type(C).__name__}")


def _label_cond(pc: str, l: str) -> Callable[[MemState], bool]:
    def cond(sigma: MemState) -> bool:
        try:
            return sigma[pc] == l
        except EvalError:
            return False
    cond.__name__ = f"{pc}={l}"
    return cond


def _beh_par(P: tuple, Z: frozenset, C: Par) -> IntvPred:
    branches = {p: c for p, c in C.branches}
    procs = tuple(sorted(branches))
    if not procs:
        return TRUE
    if len(procs) == 1:
        return _beh(procs, Z, branches[procs[0]])
    return _par_split(procs, branches, Z)


def _par_split(procs: tuple, branches: dict, Z: frozenset) -> IntvPred:
    if len(procs) == 1:
        return _beh(procs, Z, Seq(branches[procs[0]], Idle()))
    first, rest = procs[0], procs[1:]
    options = []
    for r in range(0, len(rest)):
        for extra in itertools.combinations(rest, r):
            P1 = (first,) + extra
            P2 = tuple(q for q in rest if q not in extra)
            options.append(And(_par_side(P1, branches, Z), _par_side(P2, branches, Z)))
    return Or(*options)


def _par_side(Ps: tuple, branches: dict, Z: frozenset) -> IntvPred:
    if len(Ps) == 1:
        return _beh(Ps, Z, Seq(branches[Ps[0]], Idle()))
    return Chop(_par_split(Ps, branches, Z), _beh(Ps, Z, Idle()))


# -- derived commands ---------------------------------------------------

def cas_ok(p: str, ae: Any, alpha: Any, beta: Any) -> Cmd:
    ae, alpha, beta = lift(ae), lift(alpha), lift(beta)
    return Enf(OnlyAccessedBy(Deref(ae), p), Seq(Guard(binop("==", Deref(ae), alpha)), AssignAddr(ae, beta)))


def cas_fail(p: str, ae: Any, alpha: Any) -> Cmd:
    ae, alpha = lift(ae), lift(alpha)
    return Guard(binop("!=", Deref(ae), alpha))


def cas(p: str, ae: Any, alpha: Any, beta: Any) -> Cmd:
    return Choice(cas_ok(p, ae, alpha, beta), cas_fail(p, ae, alpha))


def new_node(p: str, v: str, faddr_var: str = "FAddr", pool: Iterable[int] = ()) -> Cmd:
    """Pick a free node ``fn`` with ``fn`` and ``fn+1`` free, bind it to ``v``, mark it used.

    The choice ranges over the node-aligned starts of ``pool``.
    """
    F = Var(faddr_var)
    branches = []
    for fn in sorted(pool):
        nxt = fn + NXT.offset
        body = seq(
            Guard(binop("and", binop("in", fn, F), binop("in", nxt, F))),
            AssignVar(v, Const(fn)),
            AssignVar(faddr_var, binop("remove", binop("remove", F, fn), nxt)),
        )
        branches.append(body)
    if not branches:
        branches = [Guard(Const(False))]
    return Enf(OnlyAccessedBy(F, p), choice(branches))


def event_expr(op: str, proc: str, kind: Kind, *args: Any) -> Expr:
    """An expression whose value is the event ``op_proc^kind(args)``."""
    args = tuple(lift(a) for a in args)

    def make(*vals: Any) -> Event:
        return Event(op, proc, kind, vals)
    tag = "I" if kind is Kind.INVOKE else "R"
    return Apply(f"{op}_{proc}^{tag}", make, args, key=(op, proc, kind))


def snoc(seq_var: str, *events: Expr) -> Expr:
    out: Expr = Var(seq_var)
    for ev in events:
        out = Binary("snoc", out, ev)
    return out


def start_record(p: str, v: str, e: Expr) -> StartRecord:
    return StartRecord(v, e, p)


def end_record(p: str, v: str, e: Expr) -> EndRecord:
    return EndRecord(v, e, p)


def locations_of(C: Cmd) -> set:
    """Variables mentioned anywhere in ``C`` (contexts, assignments, expressions, labels)."""
    out: set = set()

    def walk(c: Cmd, procs: tuple) -> None:
        if isinstance(c, Guard):
            out.update(c.c.vars())
        elif isinstance(c, AssignVar):
            out.add(c.v)
            out.update(c.e.vars())
        elif isinstance(c, AssignAddr):
            out.update(c.ae.vars() | c.e.vars())
        elif isinstance(c, Seq):
            walk(c.c1, procs)
            walk(c.c2, procs)
        elif isinstance(c, Choice):
            for b in c.branches:
                walk(b, procs)
        elif isinstance(c, (Omega, Label, Enf, Rely)):
            if isinstance(c, Label):
                out.update(pc_var(p) for p in procs)
            if isinstance(c, Enf):
                for part in _flatten(c.d):
                    if isinstance(part, (StartRecord, EndRecord)):
                        out.add(part.v)
                        out.update(part.e.vars())
            walk(c.c, procs)
        elif isinstance(c, Context):
            out.update(va for va in c.Y if isinstance(va, str))
            walk(c.c, procs)
        elif isinstance(c, Init):
            if c.store:
                out.update(k for k in c.store if isinstance(k, str))
            walk(c.body, procs)
        elif isinstance(c, Par):
            for p, b in c.branches:
                walk(b, (p,))

    walk(C, ())
    return out


def _flatten(d: IntvPred) -> list:
    if isinstance(d, And):
        out = []
        for part in d.parts:
            out += _flatten(part)
        return out
    return [d]
