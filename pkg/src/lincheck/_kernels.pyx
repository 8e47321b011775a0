# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bit-table kernels for interval predicates.

A table over a window of ``n`` time points stores, for each start ``i``,
a 64-bit row whose bit ``j`` says the predicate holds on ``[i, j]``.
"""

import numpy as np
from libc.stdint cimport uint64_t

cdef extern from *:
    int __builtin_ctzll(unsigned long long x) nogil

cdef inline uint64_t _from(Py_ssize_t i, Py_ssize_t n) nogil:
    cdef uint64_t full
    if n >= 64:
        full = <uint64_t>0xFFFFFFFFFFFFFFFF
    else:
        full = ((<uint64_t>1) << n) - 1
    return full & ~(((<uint64_t>1) << i) - 1)


def chop(const uint64_t[:] a, bint ae, const uint64_t[:] b, bint be):
    cdef Py_ssize_t n = a.shape[0], i, m
    out = np.zeros(n, dtype=np.uint64)
    cdef uint64_t[:] o = out
    cdef uint64_t acc, bits
    with nogil:
        for i in range(n):
            acc = 0
            if ae:
                acc |= b[i]
            if be:
                acc |= a[i]
            bits = a[i]
            while bits:
                m = __builtin_ctzll(bits)
                bits &= bits - 1
                if m + 1 < n:
                    acc |= b[m + 1]
            o[i] = acc
    return out


def box(const uint64_t[:] g, bint ge):
    cdef Py_ssize_t n = g.shape[0], i
    out = np.zeros(n, dtype=np.uint64)
    cdef uint64_t[:] o = out
    cdef uint64_t nxt, x, y, z
    if not ge:
        return out
    with nogil:
        i = n - 1
        while i >= 0:
            nxt = o[i + 1] if i + 1 < n else 0
            x = g[i] & (nxt | ((<uint64_t>1) << i))
            y = x >> i
            z = (~y) & (y + 1)
            o[i] = (z - 1) << i
            i -= 1
    return out


def diamond(const uint64_t[:] g, bint ge):
    cdef Py_ssize_t n = g.shape[0], i
    out = np.zeros(n, dtype=np.uint64)
    cdef uint64_t[:] o = out
    cdef uint64_t acc
    with nogil:
        i = n - 1
        while i >= 0:
            if ge:
                o[i] = _from(i, n)
            else:
                acc = g[i]
                if i + 1 < n:
                    acc |= o[i + 1]
                if acc:
                    o[i] = _from(__builtin_ctzll(acc), n)
            i -= 1
    return out


def omega(const uint64_t[:] g):
    cdef Py_ssize_t n = g.shape[0], i, m
    out = np.zeros(n, dtype=np.uint64)
    cdef uint64_t[:] o = out
    cdef uint64_t acc, bits
    with nogil:
        i = n - 1
        while i >= 0:
            acc = g[i]
            bits = g[i]
            while bits:
                m = __builtin_ctzll(bits)
                bits &= bits - 1
                if m + 1 < n:
                    acc |= o[m + 1]
            o[i] = acc
            i -= 1
    return out


def runs(uint64_t mask, Py_ssize_t n):
    """Row ``i`` holds the maximal run of set bits of ``mask`` starting at ``i``."""
    out = np.zeros(n, dtype=np.uint64)
    cdef uint64_t[:] o = out
    cdef Py_ssize_t i
    cdef uint64_t y, z
    with nogil:
        for i in range(n):
            y = (mask & _from(0, n)) >> i
            z = (~y) & (y + 1)
            o[i] = (z - 1) << i
    return out


def from_first(uint64_t mask, Py_ssize_t n):
    """Row ``i`` holds every ``j`` at or after the first set bit of ``mask`` at or after ``i``."""
    out = np.zeros(n, dtype=np.uint64)
    cdef uint64_t[:] o = out
    cdef Py_ssize_t i
    cdef uint64_t rest
    with nogil:
        for i in range(n):
            rest = mask & _from(i, n)
            if rest:
                o[i] = _from(__builtin_ctzll(rest), n)
    return out
