"""Dense two-phase simplex with Bland's anti-cycling rule.

Solves   min c.x  subject to  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.
Problems here are small (a few hundred rows, a few dozen columns), so the
full tableau is kept and pivoted in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

TOL = 1e-7
PIVOT_TOL = 1e-10
COND_LIMIT = 1e10


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: Optional[NDArray[np.float64]]
    value: float
    ill_conditioned: bool = False
    iterations: int = 0

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"


class _Tableau:
    def __init__(self, M, basis):
        self.M = M  # rows: constraints, last row: objective; last column: rhs
        self.basis = basis
        self.iterations = 0

    def pivot(self, r, c):
        M = self.M
        M[r] /= M[r, c]
        col = M[:, c].copy()
        col[r] = 0.0
        nz = np.flatnonzero(np.abs(col) > 0)
        if nz.size:
            M[nz] -= np.outer(col[nz], M[r])
        self.basis[r] = c
        self.iterations += 1

    def run(self, allowed: NDArray[np.bool_], max_iter: int) -> str:
        """Minimize the objective row; Bland's rule on entering and leaving."""
        M = self.M
        m = M.shape[0] - 1
        while True:
            if self.iterations > max_iter:
                raise RuntimeError("simplex iteration limit reached")
            red = M[m, :-1]
            cand = np.flatnonzero((red < -PIVOT_TOL) & allowed)
            if cand.size == 0:
                return "optimal"
            c = int(cand[0])
            colv = M[:m, c]
            rows = np.flatnonzero(colv > PIVOT_TOL)
            if rows.size == 0:
                return "unbounded"
            ratios = M[rows, -1] / colv[rows]
            best = ratios.min()
            ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
            r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
            self.pivot(r, c)


def solve_lp(
    c=None,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    n_vars: Optional[int] = None,
    tol: float = TOL,
) -> LPResult:
    """Two-phase simplex.  With ``c`` omitted only feasibility is decided."""
    blocks = [a for a in (A_ub, A_eq) if a is not None and np.size(a)]
    if n_vars is None:
        if c is not None:
            n_vars = len(c)
        elif blocks:
            n_vars = np.atleast_2d(blocks[0]).shape[1]
        else:
            raise ValueError("cannot infer the number of variables")
    A_ub = np.zeros((0, n_vars)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    A_eq = np.zeros((0, n_vars)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float).ravel()
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float).ravel()
    A_ub = A_ub.reshape(-1, n_vars)
    A_eq = A_eq.reshape(-1, n_vars)
    mu, me = A_ub.shape[0], A_eq.shape[0]
    m = mu + me
    if m == 0:
        x = np.zeros(n_vars)
        if c is not None and np.any(np.asarray(c) < 0):
            return LPResult("unbounded", x, -np.inf)
        return LPResult("optimal", x, 0.0)

    # every inequality row gets a slack column (+1); rows with negative rhs
    # are negated so the slack becomes a surplus and needs an artificial
    A = np.vstack([A_ub, A_eq])
    b = np.concatenate([b_ub, b_eq])
    slack_sign = np.concatenate([np.ones(mu), np.zeros(me)])
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    slack_sign[neg] *= -1
    needs_art = np.concatenate([neg[:mu], np.ones(me, dtype=bool)])
    art_rows = np.flatnonzero(needs_art)
    n_art = art_rows.size
    ncol = n_vars + mu + n_art
    M = np.zeros((m + 1, ncol + 1))
    M[:m, :n_vars] = A
    M[np.arange(mu), n_vars + np.arange(mu)] = slack_sign[:mu]
    M[art_rows, n_vars + mu + np.arange(n_art)] = 1.0
    M[:m, -1] = b
    basis = [0] * m
    for i in range(mu):
        if not needs_art[i]:
            basis[i] = n_vars + i
    for j, i in enumerate(art_rows):
        basis[i] = n_vars + mu + j
    tab = _Tableau(M, basis)
    max_iter = 50 * (m + ncol) + 1000

    # phase 1: minimize the sum of artificials
    if n_art:
        M[m, :] = 0.0
        M[m, :] -= M[art_rows].sum(axis=0)
        M[m, n_vars + mu :ncol] = 0.0
        tab.run(np.ones(ncol, dtype=bool), max_iter)
        infeas = -M[m, -1]
        if infeas > tol:
            return LPResult("infeasible", None, np.inf, iterations=tab.iterations)
        # drive remaining artificials out of the basis
        art_start = n_vars + mu
        drop = []
        for r in range(m):
            if tab.basis[r] >= art_start:
                row = M[r, :art_start]
                nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if nz.size:
                    tab.pivot(r, int(nz[0]))
                else:
                    drop.append(r)
        if drop:
            keep = [r for r in range(m) if r not in drop]
            M = np.vstack([M[keep], M[m : m + 1]])
            tab.M = M
            tab.basis = [tab.basis[r] for r in keep]
            m = len(keep)
        allowed = np.zeros(ncol, dtype=bool)
        allowed[:art_start] = True
    else:
        allowed = np.ones(ncol, dtype=bool)

    # phase 2
    cost = np.zeros(ncol)
    if c is not None:
        cost[:n_vars] = np.asarray(c, float)
    M = tab.M
    M[m, :] = 0.0
    M[m, :ncol] = cost
    for r, bv in enumerate(tab.basis):
        if cost[bv] != 0:
            M[m] -= cost[bv] * M[r]
    status = tab.run(allowed, max_iter) if c is not None else "optimal"
    x_full = np.zeros(ncol)
    for r, bv in enumerate(tab.basis):
        x_full[bv] = M[r, -1]
    x = x_full[:n_vars]
    ill = _ill_conditioned(np.hstack([A, np.zeros((A.shape[0], 0))]), tab.basis, n_vars, mu, slack_sign)
    value = float(np.dot(cost[:n_vars], x)) if status == "optimal" else -np.inf
    return LPResult(status, x, value, ill, tab.iterations)


def _ill_conditioned(A, basis, n_vars, mu, slack_sign) -> bool:
    """Condition estimate of the final basis columns (structural + slack)."""
    m = A.shape[0]
    cols = []
    for bv in basis:
        if bv < n_vars:
            cols.append(A[:, bv])
        elif bv < n_vars + mu:
            e = np.zeros(m)
            e[bv - n_vars] = slack_sign[bv - n_vars]
            cols.append(e)
        else:
            e = np.zeros(m)
            cols.append(e)
    if not cols:
        return False
    B = np.column_stack(cols)
    if B.shape[0] != B.shape[1]:
        return False
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(B)
    return bool(not np.isfinite(cond) or cond > COND_LIMIT)
