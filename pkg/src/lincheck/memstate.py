"""Memory states with fractional permissions, and pointer expressions.

Locations are either variable names (``str``) or addresses (``int``).
A state stores one value per declared location and a permission row
``Π.va`` giving each process an exact fraction in ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Iterable, Mapping, Optional, Union

from .values import EMPTY, NULL, UNDEF, Marker, PtrCtr, same, show, value_key

Loc = Union[str, int]

ZERO = Fraction(0)
ONE = Fraction(1)


class EvalError(Exception):
    """An expression could not be evaluated in a state."""


def is_var(loc: Loc) -> bool:
    return isinstance(loc, str)


def is_addr(loc: Any) -> bool:
    return isinstance(loc, int) and not isinstance(loc, bool) and loc >= 0


@dataclass(frozen=True)
class Universe:
    """The declared finite set of locations and processes."""

    locations: tuple
    procs: tuple

    def __post_init__(self) -> None:
        locs = tuple(self.locations)
        if len(set(locs)) != len(locs):
            raise ValueError("duplicate location in universe")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "procs", tuple(self.procs))

    @cached_property
    def loc_index(self) -> dict:
        return {loc: i for i, loc in enumerate(self.locations)}

    @cached_property
    def proc_index(self) -> dict:
        return {p: i for i, p in enumerate(self.procs)}

    def __contains__(self, loc: Any) -> bool:
        return loc in self.loc_index and type(loc) in (str, int)


class Perm(str, Enum):
    WRITE = "write"
    READ = "read"
    DENIED = "denied"


@dataclass(frozen=True)
class MemState:
    """A store plus the permission map ``Π``.

    ``values[i]`` is the value of ``universe.locations[i]`` and
    ``perms[i][j]`` the fraction held by ``universe.procs[j]``.
    """

    universe: Universe
    values: tuple
    perms: tuple

    @classmethod
    def build(cls, universe: Universe, store: Mapping[Loc, Any],
              perms: Optional[Mapping[Loc, Mapping[str, Any]]] = None,
              default: Any = 0) -> "MemState":
        vals = tuple(store.get(loc, default) for loc in universe.locations)
        rows = []
        for loc in universe.locations:
            row = (perms or {}).get(loc, {})
            rows.append(tuple(Fraction(row.get(p, 0)) for p in universe.procs))
        return cls(universe, vals, tuple(rows))

    def __getitem__(self, loc: Loc) -> Any:
        try:
            return self.values[self.universe.loc_index[loc]]
        except KeyError:
            raise EvalError(f"location {loc!r} outside the universe") from None

    def perm(self, loc: Loc, p: str) -> Fraction:
        return self.perms[self.universe.loc_index[loc]][self.universe.proc_index[p]]

    def store(self) -> dict:
        return dict(zip(self.universe.locations, self.values))

    @cached_property
    def write_pairs(self) -> frozenset:
        """``(location, process)`` pairs holding full write permission."""
        U = self.universe
        return frozenset((loc, p) for loc, row in zip(U.locations, self.perms)
                         for p, f in zip(U.procs, row) if f == 1)

    def updated(self, changes: Mapping[Loc, Any]) -> "MemState":
        vals = list(self.values)
        idx = self.universe.loc_index
        for loc, v in changes.items():
            vals[idx[loc]] = v
        return MemState(self.universe, tuple(vals), self.perms)

    def with_perms(self, perms: tuple) -> "MemState":
        return MemState(self.universe, self.values, perms)

    def render(self) -> str:
        parts = []
        for i, loc in enumerate(self.universe.locations):
            row = "".join(_perm_letter(f) for f in self.perms[i])
            parts.append(f"{loc}={show(self.values[i])}[{row}]")
        return " ".join(parts)


def _perm_letter(f: Fraction) -> str:
    return "W" if f == 1 else ("R" if f > 0 else "-")


def perm_class(sigma: MemState, va: Loc, p: str) -> Perm:
    f = sigma.perm(va, p)
    if f == 1:
        return Perm.WRITE
    if f > 0:
        return Perm.READ
    return Perm.DENIED


def W(sigma: MemState, va: Loc, p: str) -> bool:
    return sigma.perm(va, p) == 1


def R(sigma: MemState, va: Loc, p: str) -> bool:
    f = sigma.perm(va, p)
    return 0 < f < 1


def D(sigma: MemState, va: Loc, p: str) -> bool:
    return sigma.perm(va, p) == 0


def interferes(sigma: MemState, VA: Iterable[Loc], P: Iterable[str]) -> bool:
    outside = [q for q in sigma.universe.procs if q not in set(P)]
    return any(W(sigma, va, q) for va in VA for q in outside)


def hc2_check(sigma: MemState) -> bool:
    return all(sum(row, ZERO) <= 1 for row in sigma.perms)


# -- expressions --------------------------------------------------------

@dataclass(frozen=True)
class Field:
    name: str
    offset: int


KEY = Field("key", 0)
NXT = Field("nxt", 1)


class Expr:
    """Base class of expression nodes."""

    def ev(self, sigma: MemState) -> Any:
        raise NotImplementedError

    def acc(self, sigma: MemState, out: set, strict: bool) -> None:
        raise NotImplementedError

    def vars(self) -> set:
        return set()


@dataclass(frozen=True)
class Const(Expr):
    k: Any

    def ev(self, sigma):
        return self.k

    def acc(self, sigma, out, strict):
        return None

    def __repr__(self):
        return show(self.k)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def ev(self, sigma):
        return sigma[self.name]

    def acc(self, sigma, out, strict):
        out.add(self.name)

    def vars(self):
        return {self.name}

    def __repr__(self):
        return self.name


def _as_addr(a: Any, sigma: MemState) -> int:
    if not is_addr(a):
        raise EvalError(f"dereference of non-address {show(a)}")
    if a not in sigma.universe.loc_index:
        raise EvalError(f"address {a} outside the universe")
    return a


@dataclass(frozen=True)
class Deref(Expr):
    ae: Expr

    def ev(self, sigma):
        return sigma[_as_addr(self.ae.ev(sigma), sigma)]

    def acc(self, sigma, out, strict):
        self.ae.acc(sigma, out, strict)
        try:
            out.add(_as_addr(self.ae.ev(sigma), sigma))
        except EvalError:
            if strict:
                raise

    def vars(self):
        return self.ae.vars()

    def __repr__(self):
        return f"*{self.ae!r}"


@dataclass(frozen=True)
class FieldAddr(Expr):
    ae: Expr
    field: Field

    def ev(self, sigma):
        a = self.ae.ev(sigma)
        if not is_addr(a):
            raise EvalError(f"field offset on non-address {show(a)}")
        return a + self.field.offset

    def acc(self, sigma, out, strict):
        self.ae.acc(sigma, out, strict)

    def vars(self):
        return self.ae.vars()

    def __repr__(self):
        return f"{self.ae!r}.{self.field.name}"


def FieldVal(ae: Expr, f: Field) -> Deref:
    """``ae ↦ f``, stored in its normal form ``*(ae·f)``."""
    return Deref(FieldAddr(ae, f))


def _ptr(v):
    if isinstance(v, PtrCtr):
        return v.ptr
    raise TypeError("ptr of non-pair")


def _ctr(v):
    if isinstance(v, PtrCtr):
        return v.ctr
    raise TypeError("ctr of non-pair")


def _num(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError("arithmetic on non-integer")
    return v


def _bool(v):
    if not isinstance(v, bool):
        raise TypeError("boolean connective on non-boolean")
    return v


UNARY: dict[str, Callable[[Any], Any]] = {
    "ptr": _ptr,
    "ctr": _ctr,
    "not": lambda v: not _bool(v),
    "neg": lambda v: -_num(v),
    "head": lambda v: v[0],
    "tail": lambda v: tuple(v[1:]),
    "len": lambda v: len(v),
}

BINARY: dict[str, Callable[[Any, Any], Any]] = {
    "+": lambda a, b: _num(a) + _num(b),
    "-": lambda a, b: _num(a) - _num(b),
    "==": same,
    "!=": lambda a, b: not same(a, b),
    "<": lambda a, b: _num(a) < _num(b),
    "<=": lambda a, b: _num(a) <= _num(b),
    "and": lambda a, b: _bool(a) and _bool(b),
    "or": lambda a, b: _bool(a) or _bool(b),
    "pair": lambda a, b: PtrCtr(a, _num(b)),
    "cons": lambda a, b: (a,) + tuple(b),
    "snoc": lambda a, b: tuple(a) + (b,),
    "concat": lambda a, b: tuple(a) + tuple(b),
    "in": lambda a, b: a in b,
    "remove": lambda a, b: frozenset(a) - {b},
}


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    e: Expr

    def ev(self, sigma):
        v = self.e.ev(sigma)
        try:
            return UNARY[self.op](v)
        except (TypeError, IndexError) as exc:
            raise EvalError(f"{self.op}({show(v)}): {exc}") from None

    def acc(self, sigma, out, strict):
        self.e.acc(sigma, out, strict)

    def vars(self):
        return self.e.vars()

    def __repr__(self):
        return f"{self.op}({self.e!r})"


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    a: Expr
    b: Expr

    def ev(self, sigma):
        x, y = self.a.ev(sigma), self.b.ev(sigma)
        try:
            return BINARY[self.op](x, y)
        except (TypeError, IndexError) as exc:
            raise EvalError(f"{show(x)} {self.op} {show(y)}: {exc}") from None

    def acc(self, sigma, out, strict):
        self.a.acc(sigma, out, strict)
        self.b.acc(sigma, out, strict)

    def vars(self):
        return self.a.vars() | self.b.vars()

    def __repr__(self):
        return f"({self.a!r} {self.op} {self.b!r})"


@dataclass(frozen=True)
class Apply(Expr):
    """An arbitrary total function of sub-expressions, for record building."""

    name: str
    fn: Callable = field(compare=False, hash=False)
    args: tuple = ()
    key: Any = None

    def ev(self, sigma):
        vals = [a.ev(sigma) for a in self.args]
        try:
            return self.fn(*vals)
        except (TypeError, IndexError) as exc:
            raise EvalError(f"{self.name}: {exc}") from None

    def acc(self, sigma, out, strict):
        for a in self.args:
            a.acc(sigma, out, strict)

    def vars(self):
        out = set()
        for a in self.args:
            out |= a.vars()
        return out

    def __repr__(self):
        return f"{self.name}(" + ",".join(map(repr, self.args)) + ")"


def lift(x: Any) -> Expr:
    """Variables are written as strings, everything else becomes a constant."""
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return Var(x)
    return Const(x)


def ptr(e: Any) -> Expr:
    return Unary("ptr", lift(e))


def ctr(e: Any) -> Expr:
    return Unary("ctr", lift(e))


def deref(e: Any) -> Expr:
    return Deref(lift(e))


def binop(op: str, a: Any, b: Any) -> Expr:
    return Binary(op, lift(a), lift(b))


def eq(a: Any, b: Any) -> Expr:
    return binop("==", a, b)


def ne(a: Any, b: Any) -> Expr:
    return binop("!=", a, b)


def eval_expr(e: Expr, sigma: MemState) -> Any:
    """Strict evaluation: raises ``EvalError`` on a bad dereference."""
    return e.ev(sigma)


# The operation name used throughout the toolkit.
eval = eval_expr  # noqa: A001


def value_of(e: Expr, sigma: MemState) -> Any:
    """Total evaluation: ``UNDEF`` wherever strict evaluation fails."""
    try:
        return e.ev(sigma)
    except EvalError:
        return UNDEF


def accessed(e: Expr, sigma: MemState, strict: bool = True) -> frozenset:
    """Locations read to evaluate ``e``; lenient mode skips undefined addresses."""
    out: set = set()
    e.acc(sigma, out, strict)
    return frozenset(out)


def read_all_locs(e: Expr, p: str, sigma: MemState) -> bool:
    return all(R(sigma, va, p) for va in accessed(e, sigma))


def holds_state(c: Expr, sigma: MemState) -> bool:
    """A boolean expression read as a state predicate; undefined means false."""
    return value_of(c, sigma) is True
