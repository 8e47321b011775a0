"""Pure-Python versions of the bit-table kernels.

Same contracts as the compiled module; used when it is not built.
"""

from __future__ import annotations

import numpy as np

_M64 = (1 << 64) - 1


def _from(i: int, n: int) -> int:
    return ((1 << n) - 1) & ~((1 << i) - 1)


def _out(rows: list[int]) -> np.ndarray:
    return np.array(rows, dtype=np.uint64)


def chop(a, ae, b, be):
    a = [int(x) for x in a]
    b = [int(x) for x in b]
    n = len(a)
    rows = []
    for i in range(n):
        acc = (b[i] if ae else 0) | (a[i] if be else 0)
        bits = a[i]
        while bits:
            low = bits & -bits
            m = low.bit_length() - 1
            bits ^= low
            if m + 1 < n:
                acc |= b[m + 1]
        rows.append(acc)
    return _out(rows)


def box(g, ge):
    g = [int(x) for x in g]
    n = len(g)
    rows = [0] * n
    if not ge:
        return _out(rows)
    for i in range(n - 1, -1, -1):
        nxt = rows[i + 1] if i + 1 < n else 0
        y = (g[i] & (nxt | (1 << i))) >> i
        z = (~y) & (y + 1) & _M64
        rows[i] = ((z - 1) & _M64) << i & _M64
    return _out(rows)


def diamond(g, ge):
    g = [int(x) for x in g]
    n = len(g)
    rows = [0] * n
    for i in range(n - 1, -1, -1):
        if ge:
            rows[i] = _from(i, n)
            continue
        acc = g[i] | (rows[i + 1] if i + 1 < n else 0)
        if acc:
            rows[i] = _from((acc & -acc).bit_length() - 1, n)
    return _out(rows)


def omega(g):
    g = [int(x) for x in g]
    n = len(g)
    rows = [0] * n
    for i in range(n - 1, -1, -1):
        acc = bits = g[i]
        while bits:
            low = bits & -bits
            m = low.bit_length() - 1
            bits ^= low
            if m + 1 < n:
                acc |= rows[m + 1]
        rows[i] = acc
    return _out(rows)


def runs(mask, n):
    mask = int(mask) & ((1 << n) - 1)
    rows = []
    for i in range(n):
        y = mask >> i
        z = (~y) & (y + 1)
        rows.append((z - 1) << i)
    return _out(rows)


def from_first(mask, n):
    mask = int(mask)
    rows = []
    for i in range(n):
        rest = mask & _from(i, n)
        rows.append(_from((rest & -rest).bit_length() - 1, n) if rest else 0)
    return _out(rows)
