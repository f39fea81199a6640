"""Compiled kernels for disagreement-minimizing orders.

``T[i, j] == 1`` means item i measured less than item j.  An order lists
items from smallest to largest; a pair costs one unit when the later item
measured less than the earlier one.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def score(T, order):
    n = order.shape[0]
    s = 0
    for p in range(n):
        a = order[p]
        for q in range(p + 1, n):
            s += T[order[q], a]
    return s


@numba.njit(cache=True)
def _popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@numba.njit(cache=True)
def subset_dp(T, items):
    """Exact minimizer over all orders of ``items`` (len <= ~20).

    dp[mask] = fewest disagreements of any order of the items in mask; the
    item placed last costs the number of earlier items it measured less than.
    Ties go to the lowest item position, so the result is deterministic.
    """
    w = items.shape[0]
    less = np.zeros(w, dtype=np.int64)
    for j in range(w):
        m = 0
        for i in range(w):
            if i != j and T[items[j], items[i]] == 1:
                m |= 1 << i
        less[j] = m
    full = (1 << w) - 1
    dp = np.full(full + 1, np.iinfo(np.int64).max, dtype=np.int64)
    last = np.full(full + 1, -1, dtype=np.int64)
    dp[0] = 0
    for mask in range(1, full + 1):
        best = np.iinfo(np.int64).max
        arg = -1
        for j in range(w):
            bit = 1 << j
            if mask & bit:
                rest = mask ^ bit
                c = dp[rest] + _popcount(rest & less[j])
                if c < best:
                    best = c
                    arg = j
        dp[mask] = best
        last[mask] = arg
    out = np.empty(w, dtype=np.int64)
    mask = full
    for p in range(w - 1, -1, -1):
        j = last[mask]
        out[p] = items[j]
        mask ^= 1 << j
    return out, dp[full]


@numba.njit(cache=True)
def merge_sort(T, start):
    """Bottom-up merge sort using the measured table as comparator."""
    n = start.shape[0]
    a = start.copy()
    b = np.empty_like(a)
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                # take the right item first only if it measured less
                if T[a[j], a[i]] == 1:
                    b[k] = a[j]
                    j += 1
                else:
                    b[k] = a[i]
                    i += 1
                k += 1
            while i < mid:
                b[k] = a[i]
                i += 1
                k += 1
            while j < hi:
                b[k] = a[j]
                j += 1
                k += 1
        a, b = b, a
        width *= 2
    return a


@numba.njit(cache=True)
def adjacent_pass(T, order):
    changed = 0
    for p in range(order.shape[0] - 1):
        if T[order[p + 1], order[p]] == 1 and T[order[p], order[p + 1]] == 0:
            t = order[p]
            order[p] = order[p + 1]
            order[p + 1] = t
            changed += 1
    return changed


@numba.njit(cache=True)
def reinsertion_pass(T, order, scan, radius):
    """Move each item (visited in ``scan`` order) to its best position.

    Only positions within ``radius`` of the item are tried; radius <= 0 means
    the whole order.
    """
    n = order.shape[0]
    pos = np.empty(n, dtype=np.int64)
    for p in range(n):
        pos[order[p]] = p
    gained = 0
    for e in scan:
        p = pos[e]
        best = 0
        bq = p
        acc = 0
        lo = 0 if radius <= 0 else max(0, p - radius)
        hi = n if radius <= 0 else min(n, p + radius + 1)
        for q in range(p - 1, lo - 1, -1):
            o = order[q]
            acc += T[o, e] - T[e, o]
            if acc < best:
                best = acc
                bq = q
        acc = 0
        for q in range(p + 1, hi):
            o = order[q]
            acc += T[e, o] - T[o, e]
            if acc < best:
                best = acc
                bq = q
        if best < 0:
            if bq < p:
                for q in range(p, bq, -1):
                    order[q] = order[q - 1]
                    pos[order[q]] = q
            else:
                for q in range(p, bq):
                    order[q] = order[q + 1]
                    pos[order[q]] = q
            order[bq] = e
            pos[e] = bq
            gained -= best
    return gained


@numba.njit(cache=True)
def window_polish(T, order, width):
    """Replace every sliding window by its exact optimum."""
    n = order.shape[0]
    gained = 0
    if n < 2:
        return 0
    w = min(width, n)
    for s in range(0, n - w + 1):
        items = order[s : s + w].copy()
        before = score(T, items)
        best, val = subset_dp(T, items)
        if val < before:
            order[s : s + w] = best
            gained += before - val
    return gained


@numba.njit(cache=True)
def descend(T, order, scan, width, radius):
    """Alternate swap, reinsertion and window passes until none helps.

    Reinsertion first runs with a bounded radius; the loop only ends after a
    full-range pass confirms that no single move improves the score.
    """
    rounds = 0
    while True:
        rounds += 1
        g = adjacent_pass(T, order)
        g += reinsertion_pass(T, order, scan, radius)
        g += window_polish(T, order, width)
        if g == 0:
            if radius <= 0 or reinsertion_pass(T, order, scan, 0) == 0:
                return rounds
