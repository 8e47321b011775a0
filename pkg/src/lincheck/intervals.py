"""Intervals, bounded streams and an evaluable interval-predicate language.

Evaluation is table based.  For a stream whose window has ``n`` time
points, a predicate is compiled into ``n`` bit rows (bit ``j`` of row
``i`` set iff the predicate holds on ``[i, j]``) plus one flag for the
empty interval.  Composite operators are computed from the tables of
their operands by the kernels in :mod:`lincheck.kernels`, so every
subinterval of the window is answered at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from . import kernels
from .memstate import Expr, Loc, MemState, holds_state, value_of
from .values import same, show, value_key

MAX_WINDOW = 64


class IntervalError(ValueError):
    """An interval lies outside the stream window."""


# -- intervals ----------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """``[lo, hi]``, or the empty interval when both bounds are ``None``."""

    lo: Optional[int] = None
    hi: Optional[int] = None

    def __post_init__(self) -> None:
        if (self.lo is None) != (self.hi is None):
            raise ValueError("both bounds or neither")
        if self.lo is not None and self.lo > self.hi:
            raise ValueError(f"empty range [{self.lo}, {self.hi}]; use Interval()")

    @property
    def is_empty(self) -> bool:
        return self.lo is None

    def glb(self) -> float:
        return math.inf if self.is_empty else self.lo

    def lub(self) -> float:
        return -math.inf if self.is_empty else self.hi

    def __len__(self) -> int:
        return 0 if self.is_empty else self.hi - self.lo + 1

    def __contains__(self, t: int) -> bool:
        return not self.is_empty and self.lo <= t <= self.hi

    def times(self) -> range:
        return range(0) if self.is_empty else range(self.lo, self.hi + 1)

    def __repr__(self) -> str:
        return "∅" if self.is_empty else f"[{self.lo},{self.hi}]"


EMPTY_INTERVAL = Interval()


def adjoins(d1: Interval, d2: Interval) -> bool:
    if d1.is_empty or d2.is_empty:
        return True
    return d1.hi + 1 == d2.lo


def subintervals(d: Interval) -> Iterator[Interval]:
    yield EMPTY_INTERVAL
    for lo in d.times():
        for hi in range(lo, d.hi + 1):
            yield Interval(lo, hi)


@dataclass(frozen=True, eq=False)
class Stream:
    """States at consecutive times ``start .. start + len(states) - 1``."""

    start: int
    states: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(self.states))
        if not self.states:
            raise ValueError("a stream needs at least one state")

    @property
    def end(self) -> int:
        return self.start + len(self.states) - 1

    @property
    def window(self) -> Interval:
        return Interval(self.start, self.end)

    def at(self, t: int) -> MemState:
        if not self.start <= t <= self.end:
            raise IntervalError(f"time {t} outside window {self.window}")
        return self.states[t - self.start]

    def __len__(self) -> int:
        return len(self.states)


def dump_trace(s: Stream) -> str:
    """One line per time: every location's value and each process's permission class."""
    lines = []
    for k, sigma in enumerate(s.states):
        lines.append(f"t={s.start + k:3d}  {sigma.render()}")
    return "\n".join(lines)


# -- predicate syntax ---------------------------------------------------

StateCond = Union[Expr, Callable[[MemState], bool]]


def _cond_fn(c: StateCond) -> Callable[[MemState], bool]:
    if isinstance(c, Expr):
        return lambda sigma: holds_state(c, sigma)
    return c


def _cond_name(c: StateCond) -> str:
    if isinstance(c, Expr):
        return repr(c)
    return getattr(c, "__name__", "c")


class IntvPred:
    """Base class; nodes are compared and memoised by identity."""

    def __and__(self, other: "IntvPred") -> "IntvPred":
        return And(self, other)

    def __or__(self, other: "IntvPred") -> "IntvPred":
        return Or(self, other)

    def __invert__(self) -> "IntvPred":
        return Not(self)


@dataclass(eq=False)
class TruePred(IntvPred):
    def __repr__(self):
        return "True"


@dataclass(eq=False)
class FalsePred(IntvPred):
    def __repr__(self):
        return "False"


TRUE = TruePred()
FALSE = FalsePred()


@dataclass(eq=False, init=False)
class And(IntvPred):
    parts: tuple

    def __init__(self, *parts: IntvPred) -> None:
        self.parts = tuple(parts)

    def __repr__(self):
        return "(" + " ∧ ".join(map(repr, self.parts)) + ")" if self.parts else "True"


@dataclass(eq=False, init=False)
class Or(IntvPred):
    parts: tuple

    def __init__(self, *parts: IntvPred) -> None:
        self.parts = tuple(parts)

    def __repr__(self):
        return "(" + " ∨ ".join(map(repr, self.parts)) + ")" if self.parts else "False"


@dataclass(eq=False)
class Not(IntvPred):
    g: IntvPred

    def __repr__(self):
        return f"¬{self.g!r}"


def Implies(a: IntvPred, b: IntvPred) -> IntvPred:
    return Or(Not(a), b)


@dataclass(eq=False)
class Chop(IntvPred):
    g1: IntvPred
    g2: IntvPred

    def __repr__(self):
        return f"({self.g1!r} ; {self.g2!r})"


def chain(*gs: IntvPred) -> IntvPred:
    """Right-nested chop of several predicates; empty chain is ``EmptyPred``."""
    if not gs:
        return EMPTY
    out = gs[-1]
    for g in reversed(gs[:-1]):
        out = Chop(g, out)
    return out


@dataclass(eq=False)
class Box(IntvPred):
    g: IntvPred

    def __repr__(self):
        return f"□{self.g!r}"


@dataclass(eq=False)
class Diamond(IntvPred):
    g: IntvPred

    def __repr__(self):
        return f"◇{self.g!r}"


@dataclass(eq=False)
class Prev(IntvPred):
    g: IntvPred

    def __repr__(self):
        return f"prev({self.g!r})"


@dataclass(eq=False)
class Omega(IntvPred):
    g: IntvPred

    def __repr__(self):
        return f"({self.g!r})^ω"


@dataclass(eq=False)
class _CondPred(IntvPred):
    c: Any
    _fn: Callable = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._fn = _cond_fn(self.c)

    def __repr__(self):
        return f"{type(self).__name__}({_cond_name(self.c)})"


class BoxDot(_CondPred):
    """``c`` holds at every time of the interval."""


class DiamondDot(_CondPred):
    """``c`` holds at some time of the interval."""


class Ola(_CondPred):
    """``c`` holds at the greatest lower bound."""


class Ora(_CondPred):
    """``c`` holds at the least upper bound."""


class Ceil(_CondPred):
    """The interval is a single time point satisfying ``c``."""


def _expr_eq(e: Expr, k: Any) -> Callable[[MemState], bool]:
    def cond(sigma: MemState) -> bool:
        return same(value_of(e, sigma), k)
    cond.__name__ = f"{e!r}={show(k)}"
    return cond


def OlaExprEq(e: Expr, k: Any) -> Ola:
    return Ola(_expr_eq(e, k))


def OraExprEq(e: Expr, k: Any) -> Ora:
    return Ora(_expr_eq(e, k))


def StatePredAt(c: StateCond, quantifier: str = "all") -> IntvPred:
    """``c`` in all states (``"all"``) or some state (``"some"``) of the interval."""
    if quantifier == "all":
        return BoxDot(c)
    if quantifier == "some":
        return DiamondDot(c)
    raise ValueError(f"unknown quantifier {quantifier!r}")


@dataclass(eq=False)
class StableSet(IntvPred):
    """No location of ``locs`` changes from its value one step earlier."""

    locs: tuple

    def __post_init__(self) -> None:
        self.locs = tuple(self.locs)

    def __repr__(self):
        return "stable{" + ",".join(map(str, self.locs)) + "}"


def StableLoc(va: Loc) -> StableSet:
    return StableSet((va,))


@dataclass(eq=False)
class EmptyPred(IntvPred):
    def __repr__(self):
        return "Empty"


@dataclass(eq=False)
class NonEmptyPred(IntvPred):
    def __repr__(self):
        return "¬Empty"


@dataclass(eq=False)
class FinPred(IntvPred):
    def __repr__(self):
        return "Fin"


@dataclass(eq=False)
class InfPred(IntvPred):
    def __repr__(self):
        return "Inf"


EMPTY = EmptyPred()
NONEMPTY = NonEmptyPred()


@dataclass(eq=False)
class ExistsValue(IntvPred):
    """``∃k. body(k)`` with ``k`` ranging over the values ``target`` takes in the stream.

    Restricting ``k`` to observed values is exact whenever the body can
    only hold if ``target = k`` at some time, which is how every caller
    uses it.  An explicit ``domain`` narrows the range further.
    """

    target: Any
    body: Callable[[Any], IntvPred]
    domain: Optional[Iterable[Any]] = None
    name: str = "k"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.domain is not None:
            self.domain = tuple(self.domain)

    def candidates(self, s: Stream) -> list:
        tgt = self.target
        seen = {}
        for sigma in s.states:
            v = value_of(tgt, sigma) if isinstance(tgt, Expr) else tgt(sigma)
            seen[(type(v), v)] = v
        vals = list(seen.values())
        if self.domain is not None:
            vals = [v for v in vals if any(same(v, d) for d in self.domain)]
        return sorted(vals, key=value_key)

    def instance(self, k: Any) -> IntvPred:
        key = (type(k), k)
        g = self._cache.get(key)
        if g is None:
            g = self._cache[key] = self.body(k)
        return g

    def __repr__(self):
        return f"∃{self.name}∈{self.target!r}"


class Derived(IntvPred):
    """A named predicate defined by expansion into primitive operators.

    Subclasses carry structured fields that other layers (the stream
    generator) can inspect, while evaluation goes through ``expand``.
    """

    _expansion: Optional[IntvPred] = None

    def expand(self) -> IntvPred:
        raise NotImplementedError

    def expanded(self) -> IntvPred:
        if self._expansion is None:
            self._expansion = self.expand()
        return self._expansion


@dataclass(eq=False)
class TableFn(IntvPred):
    """Escape hatch: a predicate given directly by a table builder."""

    fn: Callable[["Evaluator"], "Table"]
    label: str = "custom"

    def __repr__(self):
        return self.label


def aba_pred(e: Expr, domain: Optional[Iterable[Any]] = None) -> IntvPred:
    """``∃k1 ≠ k2. ⟡(e=k1) ; ⟡(e=k2) ; ⟡(e=k1)``."""
    def outer(k1: Any) -> IntvPred:
        def inner(k2: Any) -> IntvPred:
            if same(k1, k2):
                return FALSE
            d1 = DiamondDot(_expr_eq(e, k1))
            return chain(d1, DiamondDot(_expr_eq(e, k2)), d1)
        return ExistsValue(e, inner, domain, "k2")
    return ExistsValue(e, outer, domain, "k1")


# -- evaluation -----------------------------------------------------------

@dataclass
class Table:
    rows: np.ndarray
    e: bool

    def get(self, i: int, j: int) -> bool:
        return bool((int(self.rows[i]) >> j) & 1)


class Evaluator:
    """Computes and memoises predicate tables over one stream."""

    def __init__(self, s: Stream) -> None:
        n = len(s)
        if n > MAX_WINDOW:
            raise IntervalError(f"window of {n} states exceeds {MAX_WINDOW}")
        self.s = s
        self.n = n
        self.memo: dict = {}
        self.upper = np.array([((1 << n) - 1) & ~((1 << i) - 1) for i in range(n)], dtype=np.uint64)
        self.zero = np.zeros(n, dtype=np.uint64)

    def mask(self, fn: Callable[[MemState], bool]) -> int:
        m = 0
        for i, sigma in enumerate(self.s.states):
            if fn(sigma):
                m |= 1 << i
        return m

    def table(self, g: IntvPred) -> Table:
        t = self.memo.get(g)
        if t is None:
            t = self.memo[g] = self._compute(g)
        return t

    def _compute(self, g: IntvPred) -> Table:
        n = self.n
        if isinstance(g, TruePred) or isinstance(g, FinPred):
            return Table(self.upper.copy(), True)
        if isinstance(g, (FalsePred, InfPred)):
            return Table(self.zero.copy(), False)
        if isinstance(g, EmptyPred):
            return Table(self.zero.copy(), True)
        if isinstance(g, NonEmptyPred):
            return Table(self.upper.copy(), False)
        if isinstance(g, And):
            rows, e = self.upper.copy(), True
            for part in g.parts:
                t = self.table(part)
                rows &= t.rows
                e = e and t.e
            return Table(rows, e)
        if isinstance(g, Or):
            rows, e = self.zero.copy(), False
            for part in g.parts:
                t = self.table(part)
                rows |= t.rows
                e = e or t.e
            return Table(rows, e)
        if isinstance(g, Not):
            t = self.table(g.g)
            return Table(~t.rows & self.upper, not t.e)
        if isinstance(g, Chop):
            a, b = self.table(g.g1), self.table(g.g2)
            return Table(kernels.chop(a.rows, a.e, b.rows, b.e), a.e and b.e)
        if isinstance(g, Box):
            t = self.table(g.g)
            return Table(kernels.box(t.rows, t.e), t.e)
        if isinstance(g, Diamond):
            t = self.table(g.g)
            return Table(kernels.diamond(t.rows, t.e), t.e)
        if isinstance(g, Prev):
            t = self.table(g.g)
            union = 0
            for r in t.rows.tolist():
                union |= r
            rows = self.zero.copy()
            for i in range(n):
                if t.e or (i > 0 and (union >> (i - 1)) & 1):
                    rows[i] = self.upper[i]
            return Table(rows, t.e or union != 0)
        if isinstance(g, Omega):
            t = self.table(g.g)
            return Table(kernels.omega(t.rows), True)
        if isinstance(g, BoxDot):
            return Table(kernels.runs(self.mask(g._fn), n), True)
        if isinstance(g, DiamondDot):
            return Table(kernels.from_first(self.mask(g._fn), n), False)
        if isinstance(g, Ola):
            m = self.mask(g._fn)
            rows = np.array([self.upper[i] if (m >> i) & 1 else 0 for i in range(n)], dtype=np.uint64)
            return Table(rows, False)
        if isinstance(g, Ora):
            m = np.uint64(self.mask(g._fn))
            return Table(self.upper & m, False)
        if isinstance(g, Ceil):
            m = self.mask(g._fn)
            rows = np.array([(1 << i) if (m >> i) & 1 else 0 for i in range(n)], dtype=np.uint64)
            return Table(rows, False)
        if isinstance(g, StableSet):
            return Table(kernels.runs(self.stable_mask(g.locs), n), True)
        if isinstance(g, ExistsValue):
            rows, e = self.zero.copy(), False
            for k in g.candidates(self.s):
                t = self.table(g.instance(k))
                rows |= t.rows
                e = e or t.e
            return Table(rows, e)
        if isinstance(g, Derived):
            return self.table(g.expanded())
        if isinstance(g, TableFn):
            return g.fn(self)
        raise TypeError(f"cannot evaluate {type(g).__name__}")

    def stable_mask(self, locs: Sequence[Loc]) -> int:
        states = self.s.states
        m = 1
        for i in range(1, self.n):
            a, b = states[i - 1], states[i]
            if all(same(a[va], b[va]) for va in locs):
                m |= 1 << i
        return m

    def holds(self, g: IntvPred, d: Interval) -> bool:
        t = self.table(g)
        if d.is_empty:
            return t.e
        s = self.s
        if d.lo < s.start or d.hi > s.end:
            raise IntervalError(f"interval {d} outside window {s.window}")
        return t.get(d.lo - s.start, d.hi - s.start)


def holds(g: IntvPred, d: Interval, s: Stream) -> bool:
    return Evaluator(s).holds(g, d)


def all_intervals(s: Stream) -> Iterator[Interval]:
    return subintervals(s.window)


def _grouped(samples: Iterable[tuple[Interval, Stream]]) -> Iterator[tuple[Evaluator, Interval]]:
    cache: dict = {}
    for d, s in samples:
        ev = cache.get(id(s))
        if ev is None or ev.s is not s:
            ev = cache[id(s)] = Evaluator(s)
        yield ev, d


def entails_sampled(g1: IntvPred, g2: IntvPred, samples: Iterable[tuple[Interval, Stream]]) -> bool:
    return all(not ev.holds(g1, d) or ev.holds(g2, d) for ev, d in _grouped(samples))


def counterexample(g1: IntvPred, g2: IntvPred, samples: Iterable[tuple[Interval, Stream]]) -> Optional[tuple[Interval, Stream]]:
    for ev, d in _grouped(samples):
        if ev.holds(g1, d) and not ev.holds(g2, d):
            return d, ev.s
    return None


@dataclass(frozen=True)
class SplitsJoinsWidens:
    splits: bool
    joins: bool
    widens: bool


def classify_splits_joins_widens(g: IntvPred, samples: Iterable[tuple[Interval, Stream]]) -> SplitsJoinsWidens:
    samples = list(samples)
    return SplitsJoinsWidens(
        splits=entails_sampled(g, Box(g), samples),
        joins=entails_sampled(Chop(g, Omega(g)), g, samples),
        widens=entails_sampled(Diamond(g), g, samples),
    )
