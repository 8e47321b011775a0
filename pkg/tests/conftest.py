"""Shared builders: small random streams, named histories, and a stream pool."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Sequence

import pytest
from hypothesis import strategies as st

from lincheck.histories import History, inv, res
from lincheck.intervals import Interval, Stream
from lincheck.memstate import MemState, Universe
from lincheck.values import EMPTY

X, Y = 1, 2

H23 = History([inv("push", "p", X), inv("push", "q", Y), inv("pop", "r"),
               res("push", "q"), res("push", "p"), res("pop", "r", EMPTY)])
H32 = History([inv("push", "p", X), inv("pop", "q"), inv("pop", "r"),
               res("pop", "q", X), res("push", "r"), res("pop", "p", X)])
# the literal history answers push_r and pop_p, which were never invoked; the
# repaired reading swaps those two response owners
H32_REPAIRED = History([inv("push", "p", X), inv("pop", "q"), inv("pop", "r"),
                        res("pop", "q", X), res("push", "p"), res("pop", "r", X)])
H87 = History([inv("push", "p", X), inv("pop", "q"), res("pop", "q", X)])
HS49 = History([inv("pop", "r"), res("pop", "r", EMPTY), inv("push", "q", Y), res("push", "q"),
                inv("push", "p", X), res("push", "p")])
HS50 = History([inv("pop", "r"), res("pop", "r", EMPTY), inv("push", "p", X), res("push", "p"),
                inv("push", "q", Y), res("push", "q")])

LOCS = ("x", "y", "z")
PROCS = ("p", "q")
SMALL = Universe(LOCS, PROCS)
HALF = Fraction(1, 2)

# permission rows that respect HC2
PERM_ROWS = ({}, {"p": 1}, {"q": 1}, {"p": HALF}, {"q": HALF}, {"p": HALF, "q": HALF})


def small_state(values: Sequence[int], rows: Sequence[dict], universe: Universe = SMALL) -> MemState:
    store = dict(zip(universe.locations, values))
    perms = dict(zip(universe.locations, rows))
    return MemState.build(universe, store, perms)


def random_stream(rng: random.Random, max_len: int = 8, values: Sequence[int] = (0, 1, 2)) -> Stream:
    n = rng.randint(1, max_len)
    start = rng.randint(0, 3)
    states = []
    for _ in range(n):
        vals = [rng.choice(values) for _ in LOCS]
        rows = [rng.choice(PERM_ROWS) for _ in LOCS]
        states.append(small_state(vals, rows))
    return Stream(start, states)


def random_interval(rng: random.Random, s: Stream, p_empty: float = 0.1) -> Interval:
    if rng.random() < p_empty:
        return Interval()
    lo = rng.randint(s.start, s.end)
    return Interval(lo, rng.randint(lo, s.end))


@st.composite
def streams(draw, max_len: int = 8, values: Sequence[int] = (0, 1, 2)) -> Stream:
    n = draw(st.integers(1, max_len))
    start = draw(st.integers(0, 3))
    states = []
    for _ in range(n):
        vals = draw(st.lists(st.sampled_from(values), min_size=len(LOCS), max_size=len(LOCS)))
        rows = draw(st.lists(st.sampled_from(PERM_ROWS), min_size=len(LOCS), max_size=len(LOCS)))
        states.append(small_state(vals, rows))
    return Stream(start, states)


@st.composite
def stream_and_interval(draw, max_len: int = 8) -> tuple:
    s = draw(streams(max_len))
    if draw(st.integers(0, 9)) == 0:
        return s, Interval()
    lo = draw(st.integers(s.start, s.end))
    hi = draw(st.integers(lo, s.end))
    return s, Interval(lo, hi)


@pytest.fixture(scope="session")
def stream_pool() -> dict:
    """Generated streams shared between acceptance checks, keyed by program name."""
    return {}


ACCEPTANCE_LINES: list = []


@pytest.fixture
def verdict_line():
    """Records one PASS/FAIL line for an acceptance criterion and echoes it."""
    def record(n: int, ok: bool, detail: str) -> None:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
        ACCEPTANCE_LINES.append((n, line))
        print(line)
    return record


def pytest_terminal_summary(terminalreporter) -> None:
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES, key=lambda nl: nl[0]):
            terminalreporter.write_line(line)
