"""Counter-based uniforms keyed on query identity.

An oracle answer is a deterministic function of (stream key, point ids), so a
query drawn twice gives the same coin no matter what happened in between.
"""

from __future__ import annotations

import numba
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_INV53 = 1.0 / 9007199254740992.0


@numba.njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, inline="always")
def _pair_u(key, a, b):
    if a > b:
        a, b = b, a
    z = _mix(key ^ (np.uint64(a) * _GOLDEN))
    z = _mix(z ^ (np.uint64(b) + _GOLDEN))
    return float(z >> np.uint64(11)) * _INV53


@numba.njit(cache=True)
def point_uniforms(key, ids):
    out = np.empty(ids.shape[0])
    k = np.uint64(key)
    for i in range(ids.shape[0]):
        z = _mix(k ^ (np.uint64(ids[i]) * _GOLDEN))
        out[i] = float(_mix(z) >> np.uint64(11)) * _INV53
    return out


@numba.njit(cache=True)
def pair_uniforms(key, a_ids, b_ids):
    """Uniforms for the pairs (a_ids[i], b_ids[i]); symmetric in each pair."""
    out = np.empty(a_ids.shape[0])
    k = np.uint64(key)
    for i in range(a_ids.shape[0]):
        out[i] = _pair_u(k, a_ids[i], b_ids[i])
    return out


@numba.njit(cache=True)
def pair_uniform_grid(key, row_ids, col_ids):
    """Uniforms for every (row, col) pair as a dense matrix."""
    out = np.empty((row_ids.shape[0], col_ids.shape[0]))
    k = np.uint64(key)
    for i in range(row_ids.shape[0]):
        for j in range(col_ids.shape[0]):
            out[i, j] = _pair_u(k, row_ids[i], col_ids[j])
    return out


@numba.njit(cache=True, inline="always")
def _power(m, kappa, t):
    if kappa == 1.0:
        g = m
    else:
        g = m * t ** (kappa - 1.0)
    return min(g, 0.5)


@numba.njit(cache=True)
def fill_less_table(key, ids, v, env):
    """Measured table for envelope-type noise.

    ``env = (mL, kL, mU, kU, eps0, wL, wU)``: the correctness probability of a
    pair with value gap t is 1/2 + wL*gL(t) + wU*gU(t), with g power laws
    frozen beyond eps0.  Constant-rate noise is the kappa == 1 case.
    """
    mL, kL, mU, kU, eps0, wL, wU = env[0], env[1], env[2], env[3], env[4], env[5], env[6]
    k = np.uint64(key)
    n = ids.shape[0]
    T = np.zeros((n, n), dtype=np.int8)
    for i in range(n):
        for j in range(i + 1, n):
            t = min(abs(v[i] - v[j]), eps0)
            beta = 0.5 + wL * _power(mL, kL, t) + wU * _power(mU, kU, t)
            truth = v[i] < v[j] or (v[i] == v[j] and ids[i] < ids[j])
            if _pair_u(k, ids[i], ids[j]) < beta:
                less = truth
            else:
                less = not truth
            if less:
                T[i, j] = 1
            else:
                T[j, i] = 1
    return T


@numba.njit(cache=True)
def beaten_counts(key, rid, rv, cid, cv, env, col_counts, lo, hi):
    """For each row x: how many columns measure less than x, and whether every
    column count stays in [lo, hi] once x is added (col_counts[j] + [x < j]).

    ``env`` follows ``fill_less_table``; ids of rows and columns are disjoint.
    """
    mL, kL, mU, kU, eps0, wL, wU = env[0], env[1], env[2], env[3], env[4], env[5], env[6]
    k = np.uint64(key)
    nr, nc = rid.shape[0], cid.shape[0]
    counts = np.zeros(nr, dtype=np.int64)
    ok = np.ones(nr, dtype=np.bool_)
    for i in range(nr):
        c = 0
        good = True
        for j in range(nc):
            t = min(abs(rv[i] - cv[j]), eps0)
            beta = 0.5 + wL * _power(mL, kL, t) + wU * _power(mU, kU, t)
            truth = cv[j] < rv[i] or (cv[j] == rv[i] and cid[j] < rid[i])
            if _pair_u(k, rid[i], cid[j]) < beta:
                col_less = truth
            else:
                col_less = not truth
            if col_less:
                c += 1
                after = col_counts[j]
            else:
                after = col_counts[j] + 1
            if after < lo or after > hi:
                good = False
        counts[i] = c
        ok[i] = good
    return counts, ok
